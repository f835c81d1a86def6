#include "toporig/dataset.hpp"
#include "toporig/examples.hpp"
#include "toporig/metrics.hpp"
#include "toporig/service.hpp"

#include <CLI11.hpp>

#include <csignal>
#include <cstdio>
#include <iostream>
#include <pthread.h>
#include <thread>

#ifdef _OPENMP
#include <omp.h>
#endif

using namespace toporig;
namespace fs = std::filesystem;

namespace {

int run_gen(std::uint64_t seed, std::uint64_t count, const fs::path& out, const std::string& config_path, int threads,
            bool quiet) {
#ifdef _OPENMP
    if (threads > 0) omp_set_num_threads(threads);
#else
    (void)threads;
#endif
    const DatasetConfig config = config_path.empty() ? DatasetConfig{} : DatasetConfig::load(config_path);
    config.validate();
    const TexturePool pool = open_texture_pool(config);
    GenerateOptions opts;
    if (!quiet)
        opts.progress = [](std::uint64_t done, std::uint64_t total) {
            if (done == total || done % 50 == 0) std::fprintf(stderr, "\r%llu / %llu", (unsigned long long)done, (unsigned long long)total);
            if (done == total) std::fputc('\n', stderr);
        };
    const auto manifest = generate_dataset(config, seed, count, out, pool, opts);
    std::cout << "wrote " << manifest.samples.size() << " samples to " << out.string() << "\n";
    return 0;
}

int run_validate(const fs::path& root) {
    const auto manifest = DatasetManifest::load(root);
    const auto report = validate_dataset(root, open_texture_pool(manifest.config));
    for (const auto& e : report.errors) std::cerr << e << "\n";
    std::cout << report.samples_checked << " samples checked, " << report.errors.size() << " errors\n";
    return report.ok() ? 0 : 1;
}

int run_score(const fs::path& pred, const fs::path& gt, const std::string& out) {
    const auto report = score_frames(pred, gt);
    const std::string text = report.to_json().dump(2) + "\n";
    if (out.empty()) std::cout << text;
    else write_file_atomic(out, text);
    return report.scored > 0 ? 0 : 1;
}

int run_serve(const std::string& host, int port, const std::string& persist) {
    // handle shutdown signals on a dedicated thread so the server can stop cleanly
    sigset_t set;
    sigemptyset(&set);
    sigaddset(&set, SIGINT);
    sigaddset(&set, SIGTERM);
    pthread_sigmask(SIG_BLOCK, &set, nullptr);

    ServiceCore core;
    if (!persist.empty() && fs::exists(persist)) std::cerr << "restored " << core.load(persist) << " sessions\n";
    HttpServer server(core);
    const int bound = server.bind(host, port);
    std::cerr << "listening on http://" << host << ":" << bound << "\n";
    std::thread waiter([&] {
        int sig = 0;
        sigwait(&set, &sig);
        server.stop();
    });
    server.listen();
    waiter.join();
    if (!persist.empty()) {
        core.save(persist);
        std::cerr << "saved " << core.session_ids().size() << " sessions to " << persist << "\n";
    }
    return 0;
}

int run_textures(const fs::path& out, int count, std::uint64_t seed, int size) {
    fs::create_directories(out);
    const auto images = procedural_textures(count, seed, size);
    for (std::size_t i = 0; i < images.size(); ++i) {
        char name[32];
        std::snprintf(name, sizeof name, "texture_%04zu.png", i);
        write_png(out / name, images[i]);
    }
    std::cout << "wrote " << images.size() << " textures to " << out.string() << "\n";
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Procedural rigging data generator and 2D deformation tools"};
    app.require_subcommand(1);

    std::uint64_t seed = 0, count = 0;
    std::string out, config_path;
    int threads = 0;
    bool quiet = false;
    auto* gen = app.add_subcommand("gen", "Generate a paired (appearance, skeleton) dataset");
    gen->add_option("--seed", seed, "Master seed")->required();
    gen->add_option("--count", count, "Number of samples")->required();
    gen->add_option("--out", out, "Output directory")->required();
    gen->add_option("--config", config_path, "JSON generation config (defaults when omitted)");
    gen->add_option("--threads", threads, "Worker threads (0 = OpenMP default)");
    gen->add_flag("--quiet", quiet, "No progress output");

    std::string root;
    auto* val = app.add_subcommand("validate", "Re-render every sample from its metadata and compare bytes");
    val->add_option("dir", root, "Dataset root")->required();

    std::string pred, gt, report;
    auto* score = app.add_subcommand("score", "MSE / PSNR between two frame directories");
    score->add_option("--pred", pred, "Predicted frames")->required();
    score->add_option("--gt", gt, "Ground-truth frames")->required();
    score->add_option("--report", report, "Write the JSON report here instead of stdout");

    std::string backend = "arap", ex_out;
    auto* ex = app.add_subcommand("examples", "Bend a textured bar with one deformation backend");
    ex->add_option("--backend", backend, "rigid, arap or bbw")->check(CLI::IsMember({"rigid", "arap", "bbw"}));
    ex->add_option("--out", ex_out, "Output directory")->required();

    std::string host = "127.0.0.1", persist;
    int port = 8420;
    auto* serve = app.add_subcommand("serve", "Annotation and preview HTTP service");
    serve->add_option("--port", port, "TCP port (0 picks a free one)");
    serve->add_option("--host", host, "Bind address");
    serve->add_option("--persist", persist, "Restore sessions from and save them to this directory");

    std::string tex_out;
    int tex_count = 64, tex_size = 256;
    std::uint64_t tex_seed = 1;
    auto* tex = app.add_subcommand("textures", "Write the procedural texture pool as PNG files");
    tex->add_option("--out", tex_out, "Output directory")->required();
    tex->add_option("--count", tex_count, "Number of textures");
    tex->add_option("--seed", tex_seed, "Pool seed");
    tex->add_option("--size", tex_size, "Side length in pixels");

    auto* cfg = app.add_subcommand("config", "Print the default generation config");

    CLI11_PARSE(app, argc, argv);
    try {
        if (*gen) return run_gen(seed, count, out, config_path, threads, quiet);
        if (*val) return run_validate(root);
        if (*score) return run_score(pred, gt, report);
        if (*ex) {
            write_bar_examples(make_bar_scene(), parse_backend(backend), ex_out);
            std::cout << "wrote " << backend << " examples to " << ex_out << "\n";
            return 0;
        }
        if (*serve) return run_serve(host, port, persist);
        if (*tex) return run_textures(tex_out, tex_count, tex_seed, tex_size);
        if (*cfg) {
            std::cout << DatasetConfig{}.to_json().dump(2) << "\n";
            return 0;
        }
    } catch (const Error& e) {
        std::cerr << "error [" << to_string(e.code()) << "]";
        if (!e.field().empty()) std::cerr << " " << e.field();
        std::cerr << ": " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
    return 0;
}
