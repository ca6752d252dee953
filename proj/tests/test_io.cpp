#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>

#include "oracles.hpp"
#include "t3/io.hpp"

using namespace t3;
namespace fs = std::filesystem;

namespace {

fs::path test_dir() {
    fs::path dir = fs::temp_directory_path() / "t3_io_tests";
    fs::create_directories(dir);
    return dir;
}

std::string write_config(const std::string& name, const std::string& extra) {
    // A tiny but valid config; `extra` lines override or extend it.
    const fs::path path = test_dir() / name;
    std::ofstream os(path);
    os << "epochs = 1\n"
          "samples_per_domain = 60\n"
          "batch_size = 16\n"
          "warmup_iters = 2\n"
          "hidden_dim = 16\n"
          "feat_dim = 8\n"
       << extra;
    os.close();
    return path.string();
}

int run_cli(const std::string& args) {
    const char* bin = std::getenv("T3_BIN");
    REQUIRE(bin != nullptr);
    const std::string cmd = std::string(bin) + " " + args + " > /dev/null 2>&1";
    const int status = std::system(cmd.c_str());
    return WEXITSTATUS(status);
}

}  // namespace

TEST_CASE("t3b round-trip is bit-exact") {
    std::mt19937_64 rng(59);
    const fs::path path = test_dir() / "roundtrip.t3b";
    for (int trial = 0; trial < 5; ++trial) {
        Tensor3 t = oracle::random_tensor(1 + static_cast<int>(rng() % 6),
                                          1 + static_cast<int>(rng() % 6),
                                          1 + static_cast<int>(rng() % 6), rng);
        write_t3b(path.string(), t);
        Tensor3 back = read_t3b(path.string());
        REQUIRE(back.same_dims(t));
        CHECK(std::memcmp(back.data().data(), t.data().data(), t.size() * sizeof(double)) == 0);
    }
}

TEST_CASE("t3b rejects malformed files") {
    const fs::path path = test_dir() / "bad.t3b";
    SUBCASE("wrong magic") {
        std::ofstream os(path, std::ios::binary);
        os << "NOPE";
        os.close();
        CHECK_THROWS_AS(read_t3b(path.string()), IoError);
    }
    SUBCASE("truncated payload") {
        Tensor3 t(2, 2, 2);
        write_t3b(path.string(), t);
        fs::resize_file(path, fs::file_size(path) - 8);
        CHECK_THROWS_AS(read_t3b(path.string()), IoError);
    }
    SUBCASE("missing file") { CHECK_THROWS_AS(read_t3b("/nonexistent/x.t3b"), IoError); }
}

TEST_CASE("run config parsing") {
    SUBCASE("defaults load and validate") {
        const std::string path = write_config("ok.cfg", "");
        RunConfig cfg = load_run_config(path);
        CHECK(cfg.train.epochs == 1);
        CHECK(cfg.train.lambda == 1000.0);
        CHECK(cfg.source_angles.size() == 3);
    }
    SUBCASE("comments and blank lines are ignored") {
        const std::string path = write_config("comments.cfg", "# a comment\n\nlr = 0.25 # inline\n");
        CHECK(load_run_config(path).train.lr == 0.25);
    }
    SUBCASE("unknown keys are rejected") {
        const std::string path = write_config("unknown.cfg", "not_a_key = 1\n");
        CHECK_THROWS_AS(load_run_config(path), ConfigError);
    }
    SUBCASE("invariants are re-validated") {
        CHECK_THROWS_AS(load_run_config(write_config("bad1.cfg", "rho = 0.9\n")), ConfigError);
        CHECK_THROWS_AS(load_run_config(write_config("bad2.cfg", "lr = 0\n")), ConfigError);
        CHECK_THROWS_AS(load_run_config(write_config("bad3.cfg", "tau = 1.5\n")), ConfigError);
        CHECK_THROWS_AS(load_run_config(write_config("bad4.cfg", "eta0 = 2\neta_max = 1\n")),
                        ConfigError);
        CHECK_THROWS_AS(load_run_config(write_config("bad5.cfg", "label_noise = 0.1\n")),
                        ConfigError);
    }
    SUBCASE("malformed values are rejected") {
        CHECK_THROWS_AS(load_run_config(write_config("bad6.cfg", "lr = fast\n")), ConfigError);
        CHECK_THROWS_AS(load_run_config(write_config("bad7.cfg", "use_tlr = maybe\n")), ConfigError);
        CHECK_THROWS_AS(load_run_config(write_config("bad8.cfg", "lr 0.1\n")), ConfigError);
    }
    SUBCASE("default config text parses to the default config") {
        const fs::path path = test_dir() / "default.cfg";
        std::ofstream os(path);
        os << default_config_text();
        os.close();
        RunConfig cfg = load_run_config(path.string());
        RunConfig def;
        CHECK(cfg.train.lambda == def.train.lambda);
        CHECK(cfg.train.gamma == def.train.gamma);
        CHECK(cfg.source_angles == def.source_angles);
    }
}

TEST_CASE("model checkpoint round-trip") {
    std::mt19937_64 rng(61);
    ModelParams p = init_params(6, 10, 4, 3, rng);
    const std::string dir = (test_dir() / "model").string();
    save_model(dir, p);
    ModelParams q = load_model(dir);
    CHECK(p.f1.w == q.f1.w);
    CHECK(p.f1.b == q.f1.b);
    CHECK(p.f2.w == q.f2.w);
    CHECK(p.mu.w == q.mu.w);
    CHECK(p.sigma.w == q.sigma.w);
    CHECK(p.sigma.b == q.sigma.b);
}

TEST_CASE("domain csv schema") {
    DomainData d;
    d.x = Eigen::MatrixXd::Random(3, 2);
    d.y = {0, 1, 2};
    const fs::path path = test_dir() / "domain.csv";
    write_domain_csv(path.string(), d);
    std::ifstream is(path);
    std::string header;
    std::getline(is, header);
    CHECK(header == "x0,x1,label");
    int rows = 0;
    std::string line;
    while (std::getline(is, line))
        if (!line.empty()) ++rows;
    CHECK(rows == 3);
}

TEST_CASE("metrics json line") {
    MetricsRow row;
    row.iter = 3;
    row.cls = 1.5;
    row.target_acc = 0.75;
    row.mean_sigma = {1.0, 2.0};
    const std::string line = metrics_json_line(row);
    CHECK(line.find("\"iter\":3") != std::string::npos);
    CHECK(line.find("\"cls\":1.5") != std::string::npos);
    CHECK(line.find("\"target_acc\":0.75") != std::string::npos);
    CHECK(line.find("\"mean_sigma\":[1.0,2.0]") != std::string::npos);
    CHECK(metrics_json_line(row) == line);
}

TEST_CASE("cli: tsvd, check and tnn round-trip through files") {
    const fs::path dir = test_dir();
    const std::string id_path = (dir / "id.t3b").string();
    write_t3b(id_path, identity_tensor(3, 2));

    SUBCASE("tsvd on the identity tensor") {
        CHECK(run_cli("tsvd " + id_path + " " + (dir / "id_").string()) == 0);
        Tensor3 s = read_t3b((dir / "id_S.t3b").string());
        CHECK(oracle::max_abs_diff(s, identity_tensor(3, 2)) < 1e-12);
        CHECK(run_cli("check " + (dir / "id_").string() + " --input " + id_path) == 0);
    }
    SUBCASE("tsvd factors of a random tensor pass check") {
        std::mt19937_64 rng(67);
        const std::string rnd = (dir / "rnd.t3b").string();
        write_t3b(rnd, oracle::random_tensor(4, 3, 3, rng));
        CHECK(run_cli("tsvd " + rnd + " " + (dir / "rnd_").string()) == 0);
        CHECK(run_cli("check " + (dir / "rnd_").string() + " --input " + rnd) == 0);
    }
    SUBCASE("truncated file exits 2 and writes nothing") {
        const fs::path bad = dir / "trunc.t3b";
        fs::copy_file(id_path, bad, fs::copy_options::overwrite_existing);
        fs::resize_file(bad, fs::file_size(bad) - 4);
        fs::remove(dir / "t_U.t3b");
        CHECK(run_cli("tsvd " + bad.string() + " " + (dir / "t_").string()) == 2);
        CHECK(!fs::exists(dir / "t_U.t3b"));
    }
    SUBCASE("tnn of the identity tensor prints 6") {
        const char* bin = std::getenv("T3_BIN");
        REQUIRE(bin != nullptr);
        const std::string out = (dir / "tnn_out.txt").string();
        const int status =
            std::system((std::string(bin) + " tnn " + id_path + " > " + out).c_str());
        CHECK(WEXITSTATUS(status) == 0);
        std::ifstream is(out);
        double value = 0.0;
        is >> value;
        CHECK(value == doctest::Approx(6.0).epsilon(1e-10));
    }
    SUBCASE("tnn --rotate changes the value for an asymmetric tensor") {
        std::mt19937_64 rng(71);
        const std::string rnd = (dir / "asym.t3b").string();
        write_t3b(rnd, oracle::random_tensor(4, 2, 3, rng));
        const char* bin = std::getenv("T3_BIN");
        REQUIRE(bin != nullptr);
        auto read_value = [&](const std::string& args) {
            const std::string out = (dir / "val.txt").string();
            std::system((std::string(bin) + " " + args + " > " + out).c_str());
            std::ifstream is(out);
            double v = 0.0;
            is >> v;
            return v;
        };
        const double plain = read_value("tnn " + rnd);
        const double rotated = read_value("tnn " + rnd + " --rotate");
        CHECK(plain != rotated);
        Tensor3 g = read_t3b(rnd);
        CHECK(rotated == doctest::Approx(oracle::tnn(rotate(g))).epsilon(1e-8));
    }
    SUBCASE("config error exits 4") {
        const std::string bad_cfg = write_config("bad_cli.cfg", "rho = 0.5\n");
        CHECK(run_cli("train " + bad_cfg) == 4);
    }
}
