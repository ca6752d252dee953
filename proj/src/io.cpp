#include "t3/io.hpp"

#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <json.hpp>

namespace t3 {

namespace {

constexpr char kMagic[4] = {'T', '3', 'B', '1'};

void put_u32(std::ostream& os, std::uint32_t v) {
    unsigned char b[4] = {static_cast<unsigned char>(v), static_cast<unsigned char>(v >> 8),
                          static_cast<unsigned char>(v >> 16), static_cast<unsigned char>(v >> 24)};
    os.write(reinterpret_cast<const char*>(b), 4);
}

std::uint32_t get_u32(std::istream& is) {
    unsigned char b[4];
    is.read(reinterpret_cast<char*>(b), 4);
    return static_cast<std::uint32_t>(b[0]) | (static_cast<std::uint32_t>(b[1]) << 8) |
           (static_cast<std::uint32_t>(b[2]) << 16) | (static_cast<std::uint32_t>(b[3]) << 24);
}

void put_f64(std::ostream& os, double v) {
    std::uint64_t bits;
    std::memcpy(&bits, &v, 8);
    unsigned char b[8];
    for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>(bits >> (8 * i));
    os.write(reinterpret_cast<const char*>(b), 8);
}

double get_f64(std::istream& is) {
    unsigned char b[8];
    is.read(reinterpret_cast<char*>(b), 8);
    std::uint64_t bits = 0;
    for (int i = 0; i < 8; ++i) bits |= static_cast<std::uint64_t>(b[i]) << (8 * i);
    double v;
    std::memcpy(&v, &bits, 8);
    return v;
}

std::string trim(const std::string& s) {
    const auto begin = s.find_first_not_of(" \t\r");
    if (begin == std::string::npos) return "";
    const auto end = s.find_last_not_of(" \t\r");
    return s.substr(begin, end - begin + 1);
}

std::vector<double> parse_double_list(const std::string& value, const std::string& key) {
    std::vector<double> out;
    std::stringstream ss(value);
    std::string item;
    while (std::getline(ss, item, ',')) {
        item = trim(item);
        if (item.empty()) throw ConfigError("empty element in list for key '" + key + "'");
        try {
            std::size_t pos = 0;
            out.push_back(std::stod(item, &pos));
            if (pos != item.size()) throw std::invalid_argument("trailing");
        } catch (const std::exception&) {
            throw ConfigError("cannot parse '" + item + "' in list for key '" + key + "'");
        }
    }
    if (out.empty()) throw ConfigError("empty list for key '" + key + "'");
    return out;
}

double parse_double(const std::string& value, const std::string& key) {
    try {
        std::size_t pos = 0;
        double v = std::stod(value, &pos);
        if (pos != value.size()) throw std::invalid_argument("trailing");
        return v;
    } catch (const std::exception&) {
        throw ConfigError("cannot parse '" + value + "' as number for key '" + key + "'");
    }
}

long parse_long(const std::string& value, const std::string& key) {
    try {
        std::size_t pos = 0;
        long v = std::stol(value, &pos);
        if (pos != value.size()) throw std::invalid_argument("trailing");
        return v;
    } catch (const std::exception&) {
        throw ConfigError("cannot parse '" + value + "' as integer for key '" + key + "'");
    }
}

bool parse_bool(const std::string& value, const std::string& key) {
    if (value == "true" || value == "1" || value == "on") return true;
    if (value == "false" || value == "0" || value == "off") return false;
    throw ConfigError("cannot parse '" + value + "' as bool for key '" + key + "'");
}

Tensor3 matrix_to_tensor(const Eigen::MatrixXd& m) {
    Tensor3 t(static_cast<int>(m.rows()), static_cast<int>(m.cols()), 1);
    for (int i = 0; i < m.rows(); ++i)
        for (int j = 0; j < m.cols(); ++j) t(i, j, 0) = m(i, j);
    return t;
}

Eigen::MatrixXd tensor_to_matrix(const Tensor3& t) {
    if (t.n3() != 1) throw IoError("expected a single-slice tensor");
    Eigen::MatrixXd m(t.n1(), t.n2());
    for (int i = 0; i < t.n1(); ++i)
        for (int j = 0; j < t.n2(); ++j) m(i, j) = t(i, j, 0);
    return m;
}

}  // namespace

void write_t3b(const std::string& path, const Tensor3& t) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw IoError("cannot open '" + path + "' for writing");
    os.write(kMagic, 4);
    put_u32(os, static_cast<std::uint32_t>(t.n1()));
    put_u32(os, static_cast<std::uint32_t>(t.n2()));
    put_u32(os, static_cast<std::uint32_t>(t.n3()));
    for (double v : t.data()) put_f64(os, v);
    if (!os) throw IoError("write failed for '" + path + "'");
}

Tensor3 read_t3b(const std::string& path) {
    std::error_code ec;
    const auto file_size = std::filesystem::file_size(path, ec);
    if (ec) throw IoError("cannot stat '" + path + "'");
    std::ifstream is(path, std::ios::binary);
    if (!is) throw IoError("cannot open '" + path + "'");

    char magic[4];
    is.read(magic, 4);
    if (!is || std::memcmp(magic, kMagic, 4) != 0)
        throw IoError("'" + path + "' is not a T3B file");
    const std::uint32_t n1 = get_u32(is), n2 = get_u32(is), n3 = get_u32(is);
    if (!is || n1 == 0 || n2 == 0 || n3 == 0) throw IoError("'" + path + "' has invalid dims");
    const std::uint64_t count = static_cast<std::uint64_t>(n1) * n2 * n3;
    if (count > (1ull << 31)) throw IoError("'" + path + "' is implausibly large");
    if (file_size != 16 + 8 * count)
        throw IoError("'" + path + "' has wrong length for dims (" + std::to_string(n1) + "," +
                      std::to_string(n2) + "," + std::to_string(n3) + ")");

    std::vector<double> data(count);
    for (std::uint64_t i = 0; i < count; ++i) data[i] = get_f64(is);
    if (!is) throw IoError("read failed for '" + path + "'");
    return Tensor3(static_cast<int>(n1), static_cast<int>(n2), static_cast<int>(n3),
                   std::move(data));
}

void RunConfig::validate() const {
    train.validate();
    if (num_classes < 2) throw ConfigError("num_classes must be >= 2");
    if (input_dim < 1) throw ConfigError("input_dim must be >= 1");
    if (samples_per_domain < num_classes)
        throw ConfigError("samples_per_domain must be >= num_classes");
    if (!(cluster_std > 0.0)) throw ConfigError("cluster_std must be positive");
    if (!(center_radius > 0.0)) throw ConfigError("center_radius must be positive");
    if (translation_scale < 0.0) throw ConfigError("translation_scale must be >= 0");
    if (!(confusable_gap > 0.0) || confusable_gap > 1.0)
        throw ConfigError("confusable_gap must be in (0, 1]");
    if (source_angles.size() < 2) throw ConfigError("need at least two source domains");
    if (label_noise.size() != source_angles.size())
        throw ConfigError("label_noise needs one entry per source");
    for (double r : label_noise)
        if (r < 0.0 || r >= 1.0) throw ConfigError("label_noise entries must be in [0, 1)");
}

std::vector<DomainSpec> RunConfig::make_specs() const {
    validate();
    Eigen::MatrixXd centers =
        make_class_centers(num_classes, input_dim, center_radius, train.seed ^ 0x9e3779b97f4a7c15ull);
    if (confusable_gap < 1.0)
        centers.row(1) = centers.row(0) + confusable_gap * (centers.row(1) - centers.row(0));
    std::mt19937_64 rng(train.seed ^ 0xc2b2ae3d27d4eb4full);
    std::normal_distribution<double> gauss(0.0, 1.0);
    auto translation = [&]() {
        Eigen::VectorXd v(input_dim);
        for (int d = 0; d < input_dim; ++d) v(d) = gauss(rng);
        return (translation_scale / v.norm()) * v;
    };

    std::vector<DomainSpec> specs;
    for (std::size_t m = 0; m < source_angles.size(); ++m) {
        DomainSpec s;
        s.angle = source_angles[m];
        s.translation = translation();
        s.centers = centers;
        s.std_dev = cluster_std;
        s.label_noise = label_noise[m];
        s.count = samples_per_domain;
        specs.push_back(std::move(s));
    }
    DomainSpec t;
    t.angle = target_angle;
    t.translation = translation();
    t.centers = centers;
    t.std_dev = cluster_std;
    t.label_noise = 0.0;
    t.count = samples_per_domain;
    specs.push_back(std::move(t));
    return specs;
}

DomainDataset RunConfig::make_dataset() const {
    return generate(make_specs(), train.seed);
}

RunConfig load_run_config(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw ConfigError("cannot open config '" + path + "'");

    RunConfig cfg;
    std::string line;
    int lineno = 0;
    while (std::getline(is, line)) {
        ++lineno;
        const auto hash = line.find('#');
        if (hash != std::string::npos) line = line.substr(0, hash);
        line = trim(line);
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos)
            throw ConfigError(path + ":" + std::to_string(lineno) + ": expected 'key = value'");
        const std::string key = trim(line.substr(0, eq));
        const std::string value = trim(line.substr(eq + 1));
        if (key.empty() || value.empty())
            throw ConfigError(path + ":" + std::to_string(lineno) + ": empty key or value");

        if (key == "lambda") cfg.train.lambda = parse_double(value, key);
        else if (key == "eta0") cfg.train.eta0 = parse_double(value, key);
        else if (key == "eta_max") cfg.train.eta_max = parse_double(value, key);
        else if (key == "rho") cfg.train.rho = parse_double(value, key);
        else if (key == "lr") cfg.train.lr = parse_double(value, key);
        else if (key == "batch_size") cfg.train.batch_size = static_cast<int>(parse_long(value, key));
        else if (key == "epochs") cfg.train.epochs = static_cast<int>(parse_long(value, key));
        else if (key == "tau") cfg.train.tau = parse_double(value, key);
        else if (key == "alpha") cfg.train.alpha = parse_double(value, key);
        else if (key == "gamma") cfg.train.gamma = parse_double(value, key);
        else if (key == "w_ent") cfg.train.w_ent = parse_double(value, key);
        else if (key == "warmup_iters") cfg.train.warmup_iters = static_cast<int>(parse_long(value, key));
        else if (key == "seed") cfg.train.seed = static_cast<std::uint64_t>(parse_long(value, key));
        else if (key == "use_entropy") cfg.train.use_entropy = parse_bool(value, key);
        else if (key == "use_tlr") cfg.train.use_tlr = parse_bool(value, key);
        else if (key == "use_uncertainty") cfg.train.use_uncertainty = parse_bool(value, key);
        else if (key == "hidden_dim") cfg.train.hidden_dim = static_cast<int>(parse_long(value, key));
        else if (key == "feat_dim") cfg.train.feat_dim = static_cast<int>(parse_long(value, key));
        else if (key == "num_classes") cfg.num_classes = static_cast<int>(parse_long(value, key));
        else if (key == "input_dim") cfg.input_dim = static_cast<int>(parse_long(value, key));
        else if (key == "samples_per_domain") cfg.samples_per_domain = static_cast<int>(parse_long(value, key));
        else if (key == "cluster_std") cfg.cluster_std = parse_double(value, key);
        else if (key == "center_radius") cfg.center_radius = parse_double(value, key);
        else if (key == "translation_scale") cfg.translation_scale = parse_double(value, key);
        else if (key == "confusable_gap") cfg.confusable_gap = parse_double(value, key);
        else if (key == "source_angles") cfg.source_angles = parse_double_list(value, key);
        else if (key == "target_angle") cfg.target_angle = parse_double(value, key);
        else if (key == "label_noise") cfg.label_noise = parse_double_list(value, key);
        else if (key == "output_dir") cfg.output_dir = value;
        else throw ConfigError(path + ":" + std::to_string(lineno) + ": unknown key '" + key + "'");
    }
    cfg.validate();
    return cfg;
}

std::string default_config_text() {
    RunConfig cfg;
    std::ostringstream os;
    os << "# training\n";
    os << "lambda = " << cfg.train.lambda << "\n";
    os << "eta0 = " << cfg.train.eta0 << "\n";
    os << "eta_max = " << cfg.train.eta_max << "\n";
    os << "rho = " << cfg.train.rho << "\n";
    os << "lr = " << cfg.train.lr << "\n";
    os << "batch_size = " << cfg.train.batch_size << "\n";
    os << "epochs = " << cfg.train.epochs << "\n";
    os << "tau = " << cfg.train.tau << "\n";
    os << "alpha = " << cfg.train.alpha << "\n";
    os << "gamma = " << cfg.train.gamma << "\n";
    os << "w_ent = " << cfg.train.w_ent << "\n";
    os << "warmup_iters = " << cfg.train.warmup_iters << "\n";
    os << "seed = " << cfg.train.seed << "\n";
    os << "use_entropy = " << (cfg.train.use_entropy ? "true" : "false") << "\n";
    os << "use_tlr = " << (cfg.train.use_tlr ? "true" : "false") << "\n";
    os << "use_uncertainty = " << (cfg.train.use_uncertainty ? "true" : "false") << "\n";
    os << "hidden_dim = " << cfg.train.hidden_dim << "\n";
    os << "feat_dim = " << cfg.train.feat_dim << "\n";
    os << "# synthetic data\n";
    os << "num_classes = " << cfg.num_classes << "\n";
    os << "input_dim = " << cfg.input_dim << "\n";
    os << "samples_per_domain = " << cfg.samples_per_domain << "\n";
    os << "cluster_std = " << cfg.cluster_std << "\n";
    os << "center_radius = " << cfg.center_radius << "\n";
    os << "translation_scale = " << cfg.translation_scale << "\n";
    os << "confusable_gap = " << cfg.confusable_gap << "\n";
    os << "source_angles = ";
    for (std::size_t i = 0; i < cfg.source_angles.size(); ++i)
        os << (i ? "," : "") << cfg.source_angles[i];
    os << "\n";
    os << "target_angle = " << cfg.target_angle << "\n";
    os << "label_noise = ";
    for (std::size_t i = 0; i < cfg.label_noise.size(); ++i)
        os << (i ? "," : "") << cfg.label_noise[i];
    os << "\n";
    os << "output_dir = " << cfg.output_dir << "\n";
    return os.str();
}

void save_model(const std::string& dir, const ModelParams& params) {
    namespace fs = std::filesystem;
    fs::create_directories(dir);
    auto vec_to_tensor = [](const Eigen::VectorXd& v) {
        Tensor3 t(static_cast<int>(v.size()), 1, 1);
        for (int i = 0; i < v.size(); ++i) t(i, 0, 0) = v(i);
        return t;
    };
    write_t3b(dir + "/f1_w.t3b", matrix_to_tensor(params.f1.w));
    write_t3b(dir + "/f1_b.t3b", vec_to_tensor(params.f1.b));
    write_t3b(dir + "/f2_w.t3b", matrix_to_tensor(params.f2.w));
    write_t3b(dir + "/f2_b.t3b", vec_to_tensor(params.f2.b));
    write_t3b(dir + "/mu_w.t3b", matrix_to_tensor(params.mu.w));
    write_t3b(dir + "/mu_b.t3b", vec_to_tensor(params.mu.b));
    write_t3b(dir + "/sigma_w.t3b", matrix_to_tensor(params.sigma.w));
    write_t3b(dir + "/sigma_b.t3b", vec_to_tensor(params.sigma.b));
}

ModelParams load_model(const std::string& dir) {
    auto tensor_to_vec = [](const Tensor3& t) {
        Eigen::VectorXd v(t.n1());
        for (int i = 0; i < t.n1(); ++i) v(i) = t(i, 0, 0);
        return v;
    };
    ModelParams p;
    p.f1.w = tensor_to_matrix(read_t3b(dir + "/f1_w.t3b"));
    p.f1.b = tensor_to_vec(read_t3b(dir + "/f1_b.t3b"));
    p.f2.w = tensor_to_matrix(read_t3b(dir + "/f2_w.t3b"));
    p.f2.b = tensor_to_vec(read_t3b(dir + "/f2_b.t3b"));
    p.mu.w = tensor_to_matrix(read_t3b(dir + "/mu_w.t3b"));
    p.mu.b = tensor_to_vec(read_t3b(dir + "/mu_b.t3b"));
    p.sigma.w = tensor_to_matrix(read_t3b(dir + "/sigma_w.t3b"));
    p.sigma.b = tensor_to_vec(read_t3b(dir + "/sigma_b.t3b"));
    return p;
}

void save_bank(const std::string& dir, const PrototypeBank& bank) {
    namespace fs = std::filesystem;
    fs::create_directories(dir);
    Tensor3 protos(bank.num_classes, bank.feat_dim, bank.num_domains);
    Tensor3 valid(bank.num_classes, 1, bank.num_domains);
    for (int m = 0; m < bank.num_domains; ++m)
        for (int c = 0; c < bank.num_classes; ++c) {
            for (int d = 0; d < bank.feat_dim; ++d) protos(c, d, m) = bank.protos[m](c, d);
            valid(c, 0, m) = bank.valid[m][c] ? 1.0 : 0.0;
        }
    write_t3b(dir + "/bank.t3b", protos);
    write_t3b(dir + "/bank_valid.t3b", valid);
}

void write_domain_csv(const std::string& path, const DomainData& data) {
    std::ofstream os(path);
    if (!os) throw IoError("cannot open '" + path + "' for writing");
    for (Eigen::Index d = 0; d < data.x.cols(); ++d) os << "x" << d << ",";
    os << "label\n";
    os.precision(17);
    for (Eigen::Index i = 0; i < data.x.rows(); ++i) {
        for (Eigen::Index d = 0; d < data.x.cols(); ++d) os << data.x(i, d) << ",";
        os << data.y[static_cast<std::size_t>(i)] << "\n";
    }
    if (!os) throw IoError("write failed for '" + path + "'");
}

std::string metrics_json_line(const MetricsRow& row) {
    nlohmann::json j;
    j["iter"] = row.iter;
    j["cls"] = row.cls;
    j["entropy"] = row.entropy;
    j["coupling"] = row.coupling;
    j["tnn_g"] = row.tnn_g;
    j["tnn_a"] = row.tnn_a;
    j["eta"] = row.eta;
    j["target_acc"] = row.target_acc;
    j["mean_sigma"] = row.mean_sigma;
    return j.dump();
}

}  // namespace t3
