// t3 — command-line front end: tensor utilities, training runs, noise sweeps.
//
// Exit codes: 0 ok, 2 malformed input file, 3 SVD failure, 4 config error,
// 5 training divergence (partial metrics are preserved).

#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "t3/io.hpp"
#include "t3/model.hpp"
#include "t3/prototypes.hpp"
#include "t3/synthdata.hpp"
#include "t3/tensor3.hpp"
#include "t3/trainer.hpp"
#include "t3/tsvd.hpp"

namespace {

constexpr int kExitBadFile = 2;
constexpr int kExitSvdFailure = 3;
constexpr int kExitConfig = 4;
constexpr int kExitDiverged = 5;

double max_abs_diff(const t3::Tensor3& a, const t3::Tensor3& b) {
    double m = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i)
        m = std::max(m, std::abs(a.data()[i] - b.data()[i]));
    return m;
}

int run_tsvd(const std::string& input, const std::string& prefix) {
    t3::Tensor3 g = t3::read_t3b(input);
    t3::TsvdFactors f = t3::tsvd(g);
    t3::write_t3b(prefix + "U.t3b", f.u);
    t3::write_t3b(prefix + "S.t3b", f.s);
    t3::write_t3b(prefix + "V.t3b", f.v);
    t3::Tensor3 recon = t3::t_product(t3::t_product(f.u, f.s), t3::t_transpose(f.v));
    std::cout << "reconstruction_max_abs_error = " << max_abs_diff(recon, g) << "\n";
    return 0;
}

int run_tnn(const std::string& input, bool rotate_first) {
    t3::Tensor3 g = t3::read_t3b(input);
    if (rotate_first) g = t3::rotate(g);
    std::cout.precision(17);
    std::cout << t3::tensor_nuclear_norm(g) << "\n";
    return 0;
}

int run_check(const std::string& prefix, const std::string& input) {
    t3::Tensor3 u = t3::read_t3b(prefix + "U.t3b");
    t3::Tensor3 s = t3::read_t3b(prefix + "S.t3b");
    t3::Tensor3 v = t3::read_t3b(prefix + "V.t3b");
    const double u_err =
        max_abs_diff(t3::t_product(t3::t_transpose(u), u), t3::identity_tensor(u.n1(), u.n3()));
    const double v_err =
        max_abs_diff(t3::t_product(t3::t_transpose(v), v), t3::identity_tensor(v.n1(), v.n3()));
    std::cout << "u_orthogonality_error = " << u_err << "\n";
    std::cout << "v_orthogonality_error = " << v_err << "\n";
    double recon_err = -1.0;
    if (!input.empty()) {
        t3::Tensor3 g = t3::read_t3b(input);
        recon_err = max_abs_diff(t3::t_product(t3::t_product(u, s), t3::t_transpose(v)), g);
        std::cout << "reconstruction_max_abs_error = " << recon_err << "\n";
    }
    const bool ok = u_err < 1e-8 && v_err < 1e-8 && recon_err < 1e-8;
    std::cout << (ok ? "OK" : "FAILED") << "\n";
    return ok ? 0 : 1;
}

int run_train(const std::string& config_path) {
    t3::RunConfig cfg = t3::load_run_config(config_path);
    t3::DomainDataset ds = cfg.make_dataset();

    namespace fs = std::filesystem;
    fs::create_directories(cfg.output_dir);
    std::ofstream metrics(cfg.output_dir + "/metrics.jsonl");
    if (!metrics) throw t3::IoError("cannot open metrics file in '" + cfg.output_dir + "'");

    t3::TrainResult result = t3::train(cfg.train, ds, [&](const t3::MetricsRow& row) {
        metrics << t3::metrics_json_line(row) << "\n";
        metrics.flush();
    });

    t3::save_model(cfg.output_dir + "/model", result.params);
    t3::save_bank(cfg.output_dir, result.bank);

    if (result.diverged) {
        std::cerr << "training diverged: " << result.error << "\n";
        return kExitDiverged;
    }
    if (!result.metrics.empty())
        std::cout << "final_target_acc = " << result.metrics.back().target_acc << "\n";
    std::cout << "output_dir = " << cfg.output_dir << "\n";
    return 0;
}

int run_noise_sweep(const std::string& config_path, std::vector<double> r_list,
                    const std::string& model_dir) {
    t3::RunConfig cfg = t3::load_run_config(config_path);
    t3::DomainDataset ds = cfg.make_dataset();

    t3::ModelParams params;
    if (!model_dir.empty()) {
        params = t3::load_model(model_dir);
    } else {
        t3::TrainResult result = t3::train(cfg.train, ds);
        if (result.diverged) {
            std::cerr << "training diverged: " << result.error << "\n";
            return kExitDiverged;
        }
        params = result.params;
    }

    if (r_list.empty()) r_list = {0.0, 0.1, 0.5, 1.0};
    const Eigen::MatrixXd& clean = ds.sources.front().x;

    std::filesystem::create_directories(cfg.output_dir);
    std::ofstream csv(cfg.output_dir + "/noise_sweep.csv");
    std::cout << "r,mean_sigma,std_sigma\n";
    csv << "r,mean_sigma,std_sigma\n";
    for (double r : r_list) {
        // The noise draw is seeded independently of r, so duplicate r values
        // produce identical rows.
        Eigen::MatrixXd noisy = t3::inject_noise(clean, r, cfg.train.seed);
        t3::ForwardResult fwd = t3::forward(params, noisy);
        const double mean = fwd.sigma.mean();
        const double sd = std::sqrt((fwd.sigma.array() - mean).square().mean());
        std::cout << r << "," << mean << "," << sd << "\n";
        csv << r << "," << mean << "," << sd << "\n";
    }
    return 0;
}

int run_gen(const std::string& config_path) {
    t3::RunConfig cfg = t3::load_run_config(config_path);
    t3::DomainDataset ds = cfg.make_dataset();
    namespace fs = std::filesystem;
    fs::create_directories(cfg.output_dir);

    auto dump = [&](const t3::DomainData& d, const std::string& stem) {
        t3::write_domain_csv(cfg.output_dir + "/" + stem + ".csv", d);
        t3::Tensor3 x(static_cast<int>(d.x.rows()), static_cast<int>(d.x.cols()), 1);
        t3::Tensor3 y(static_cast<int>(d.x.rows()), 1, 1);
        for (Eigen::Index i = 0; i < d.x.rows(); ++i) {
            for (Eigen::Index j = 0; j < d.x.cols(); ++j)
                x(static_cast<int>(i), static_cast<int>(j), 0) = d.x(i, j);
            y(static_cast<int>(i), 0, 0) = d.y[static_cast<std::size_t>(i)];
        }
        t3::write_t3b(cfg.output_dir + "/" + stem + "_x.t3b", x);
        t3::write_t3b(cfg.output_dir + "/" + stem + "_y.t3b", y);
    };
    for (std::size_t m = 0; m < ds.sources.size(); ++m)
        dump(ds.sources[m], "source" + std::to_string(m));
    dump(ds.target, "target");
    std::cout << "output_dir = " << cfg.output_dir << "\n";
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"tensor t-product toolkit and multi-source adaptation trainer"};
    app.require_subcommand(1);

    std::string input, prefix, config_path, model_dir;
    bool rotate_flag = false;
    std::vector<double> r_list;

    auto* tsvd_cmd = app.add_subcommand("tsvd", "factor a .t3b tensor, write U/S/V");
    tsvd_cmd->add_option("input", input, "input .t3b file")->required();
    tsvd_cmd->add_option("prefix", prefix, "output prefix for U.t3b, S.t3b, V.t3b")->required();

    auto* tnn_cmd = app.add_subcommand("tnn", "print the tensor nuclear norm");
    tnn_cmd->add_option("input", input, "input .t3b file")->required();
    tnn_cmd->add_flag("--rotate", rotate_flag, "rotate (swap modes 2 and 3) first");

    auto* check_cmd = app.add_subcommand("check", "verify factor orthogonality/reconstruction");
    check_cmd->add_option("prefix", prefix, "prefix used by 'tsvd'")->required();
    check_cmd->add_option("--input", input, "original tensor for the reconstruction check");

    auto* train_cmd = app.add_subcommand("train", "run the full training loop");
    train_cmd->add_option("config", config_path, "key = value config file")->required();

    auto* sweep_cmd = app.add_subcommand("noise-sweep", "mean predicted sigma per noise level");
    sweep_cmd->add_option("config", config_path, "key = value config file")->required();
    sweep_cmd->add_option("--r", r_list, "noise intensities (default 0,0.1,0.5,1)")->delimiter(',');
    sweep_cmd->add_option("--model", model_dir, "checkpoint dir (skips in-line training)");

    auto* gen_cmd = app.add_subcommand("gen", "write the synthetic dataset as CSV and .t3b");
    gen_cmd->add_option("config", config_path, "key = value config file")->required();

    auto* cfg_cmd = app.add_subcommand("default-config", "print the default config file");

    CLI11_PARSE(app, argc, argv);

    try {
        if (tsvd_cmd->parsed()) return run_tsvd(input, prefix);
        if (tnn_cmd->parsed()) return run_tnn(input, rotate_flag);
        if (check_cmd->parsed()) return run_check(prefix, input);
        if (train_cmd->parsed()) return run_train(config_path);
        if (sweep_cmd->parsed()) return run_noise_sweep(config_path, r_list, model_dir);
        if (gen_cmd->parsed()) return run_gen(config_path);
        if (cfg_cmd->parsed()) {
            std::cout << t3::default_config_text();
            return 0;
        }
    } catch (const t3::SvdFailure& e) {
        std::cerr << "error: " << e.what() << " (slice " << e.slice_index << ")\n";
        return kExitSvdFailure;
    } catch (const t3::ConfigError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitConfig;
    } catch (const t3::SpecInvalid& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitConfig;
    } catch (const t3::IoError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitBadFile;
    } catch (const t3::Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
