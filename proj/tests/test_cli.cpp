#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "callo/image_io.hpp"
#include "callo/nn/checkpoint.hpp"
#include "callo/nn/network.hpp"
#include "synthetic.hpp"

using namespace callo;
namespace fs = std::filesystem;

namespace {

struct RunResult {
    int exit_code = -1;
    std::string output; // stdout + stderr
};

RunResult run_cli(const std::string& args) {
    static int call_no = 0;
    const fs::path out = fs::temp_directory_path() /
                         ("callo_cli_out_" + std::to_string(call_no++) + ".txt");
    const std::string cmd = std::string(CALLO_CLI_BIN) + " " + args + " > " +
                            out.string() + " 2>&1";
    const int status = std::system(cmd.c_str());
    RunResult res;
    res.exit_code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
    std::ifstream in(out);
    std::ostringstream os;
    os << in.rdbuf();
    res.output = os.str();
    fs::remove(out);
    return res;
}

struct Workspace {
    fs::path dir;
    Workspace() {
        dir = fs::temp_directory_path() / "callo_cli_ws";
        fs::remove_all(dir);
        fs::create_directories(dir);
    }
    ~Workspace() { fs::remove_all(dir); }
    std::string path(const std::string& rel) const { return (dir / rel).string(); }
};

// Two-pattern IDX fixture: class 0 = bright left half, class 1 = bright
// right half, with seeded noise.
void write_idx_pair(const fs::path& dir, std::size_t count, std::uint64_t seed) {
    Rng rng(seed);
    auto be32 = [](std::ofstream& f, std::uint32_t v) {
        const unsigned char b[4] = {
            static_cast<unsigned char>(v >> 24), static_cast<unsigned char>(v >> 16),
            static_cast<unsigned char>(v >> 8), static_cast<unsigned char>(v)};
        f.write(reinterpret_cast<const char*>(b), 4);
    };
    {
        std::ofstream imgs(dir / "train-images-idx3-ubyte",
                           std::ios::binary | std::ios::trunc);
        std::ofstream labs(dir / "train-labels-idx1-ubyte",
                           std::ios::binary | std::ios::trunc);
        be32(imgs, 2051);
        be32(imgs, static_cast<std::uint32_t>(count));
        be32(imgs, 28);
        be32(imgs, 28);
        be32(labs, 2049);
        be32(labs, static_cast<std::uint32_t>(count));
        for (std::size_t i = 0; i < count; ++i) {
            const unsigned char label = i % 2;
            labs.put(static_cast<char>(label));
            for (std::size_t y = 0; y < 28; ++y) {
                for (std::size_t x = 0; x < 28; ++x) {
                    const bool bright = label == 0 ? x < 14 : x >= 14;
                    const double base = bright ? 200.0 : 40.0;
                    const double v = base + rng.uniform(-30.0, 30.0);
                    imgs.put(static_cast<char>(static_cast<unsigned char>(
                        std::clamp(v, 0.0, 255.0))));
                }
            }
        }
    }
    // duplicate the pair under the test names so --split test also works
    fs::copy_file(dir / "train-images-idx3-ubyte", dir / "t10k-images-idx3-ubyte",
                  fs::copy_options::overwrite_existing);
    fs::copy_file(dir / "train-labels-idx1-ubyte", dir / "t10k-labels-idx1-ubyte",
                  fs::copy_options::overwrite_existing);
}

const char* kTinyNet =
    "input 28 28 1\n"
    "loss cross_entropy\n"
    "flatten\n"
    "dense units=16\n"
    "relu\n"
    "dense units=2\n";

} // namespace

TEST_CASE("help exits zero, bad flags exit one") {
    CHECK(run_cli("--help").exit_code == 0);
    CHECK(run_cli("preprocess --no-such-flag").exit_code == 1);
    CHECK(run_cli("").exit_code == 1); // subcommand required
}

TEST_CASE("preprocess handles empty and missing directories") {
    Workspace ws;
    fs::create_directories(ws.path("empty"));
    RunResult res = run_cli("preprocess --in " + ws.path("empty") + " --out " +
                            ws.path("out"));
    CHECK(res.exit_code == 0);
    CHECK(res.output.find("0 processed") != std::string::npos);
    CHECK(fs::exists(ws.path("out/run_manifest.json")));

    CHECK(run_cli("preprocess --in " + ws.path("nope") + " --out " + ws.path("out2"))
              .exit_code == 2);
}

TEST_CASE("preprocess writes passports, masks, and diagnostics") {
    Workspace ws;
    fs::create_directories(ws.path("scenes"));
    const std::size_t scene_count = 20;
    for (std::uint64_t i = 0; i < scene_count; ++i) {
        char name[32];
        std::snprintf(name, sizeof(name), "scenes/scene%02llu.ppm",
                      static_cast<unsigned long long>(i));
        synthetic::Scene scene = synthetic::whale_scene(9000 + i);
        write_ppm(ws.path(name), scene.image);
    }
    RunResult res = run_cli("preprocess --in " + ws.path("scenes") + " --out " +
                            ws.path("pp") + " --out-size 256");
    CHECK(res.exit_code == 0);
    CHECK(res.output.find("20 processed") != std::string::npos);
    // the preprocessing success property carries over: at least 16 of 20
    const auto ok_pos = res.output.find(" ok");
    REQUIRE(ok_pos != std::string::npos);
    const auto count_start = res.output.rfind(", ", ok_pos);
    const std::size_t ok_count = std::stoul(res.output.substr(count_start + 2));
    CHECK(ok_count >= 16);
    for (int i = 0; i < 4; ++i) {
        const std::string stem = "pp/scene0" + std::to_string(i);
        CHECK(fs::exists(ws.path(stem + "_passport.png")));
        CHECK(fs::exists(ws.path(stem + "_mask.pgm")));
        CHECK(fs::exists(ws.path(stem + "_diag.txt")));
    }
    Tensor passport = read_image(ws.path("pp/scene00_passport.png"));
    CHECK(passport.shape() == std::vector<std::size_t>{256, 256, 3});

    // diagnostics sidecar carries the documented fields
    std::ifstream diag(ws.path("pp/scene00_diag.txt"));
    std::ostringstream os;
    os << diag.rdbuf();
    CHECK(os.str().find("threshold_bin") != std::string::npos);
    CHECK(os.str().find("theta_deg") != std::string::npos);
    CHECK(os.str().find("mask_pixels") != std::string::npos);
}

TEST_CASE("train with zero steps stores the initialization") {
    Workspace ws;
    fs::create_directories(ws.path("data"));
    write_idx_pair(ws.dir / "data", 24, 7);
    std::ofstream(ws.path("tiny.net")) << kTinyNet;

    RunResult res = run_cli("train --mnist " + ws.path("data") + " --net " +
                            ws.path("tiny.net") + " --out " + ws.path("run0") +
                            " --steps 0");
    CHECK(res.exit_code == 0);
    REQUIRE(fs::exists(ws.path("run0/checkpoint.bin")));

    // the stored parameters equal a fresh seed-42 initialization
    NetworkSpec spec = load_network_spec(ws.path("tiny.net"));
    Network loaded(spec, 999);
    load_checkpoint(ws.path("run0/checkpoint.bin"), loaded);
    Network fresh(spec, 42);
    auto lp = loaded.params();
    auto fp = fresh.params();
    for (std::size_t t = 0; t < lp.size(); ++t) {
        for (std::size_t i = 0; i < lp[t]->size(); ++i) {
            CHECK((*lp[t])[i] == static_cast<double>(static_cast<float>((*fp[t])[i])));
        }
    }
}

TEST_CASE("training is reproducible and eval closes the loop") {
    Workspace ws;
    fs::create_directories(ws.path("data"));
    write_idx_pair(ws.dir / "data", 60, 11);
    std::ofstream(ws.path("tiny.net")) << kTinyNet;

    const std::string train_args = " --mnist " + ws.path("data") + " --net " +
                                   ws.path("tiny.net") + " --steps 150 --batch 10 --lr 0.003"
                                   " --decay-rate 1 --eval-every 0 --seed 5 --threads 1";
    RunResult a = run_cli("train" + train_args + " --out " + ws.path("runA"));
    RunResult b = run_cli("train" + train_args + " --out " + ws.path("runB"));
    REQUIRE(a.exit_code == 0);
    REQUIRE(b.exit_code == 0);

    auto slurp = [](const std::string& p) {
        std::ifstream in(p, std::ios::binary);
        std::ostringstream os;
        os << in.rdbuf();
        return os.str();
    };
    // byte-identical history logs and checkpoints
    CHECK(slurp(ws.path("runA/history.tsv")) == slurp(ws.path("runB/history.tsv")));
    CHECK(slurp(ws.path("runA/checkpoint.bin")) == slurp(ws.path("runB/checkpoint.bin")));
    CHECK(fs::exists(ws.path("runA/run_manifest.json")));

    // eval on the training data: the toy task trains to high accuracy
    RunResult ev = run_cli("eval --mnist " + ws.path("data") + " --net " +
                           ws.path("tiny.net") + " --checkpoint " +
                           ws.path("runA/checkpoint.bin") + " --out " + ws.path("eval"));
    CHECK(ev.exit_code == 0);
    REQUIRE(ev.output.find("accuracy") != std::string::npos);
    const double acc = std::stod(ev.output.substr(ev.output.find("accuracy") + 9));
    CHECK(acc >= 0.99); // converged toy run nails its own training set

    // confusion matrix row sums equal the per-class counts (30/30)
    std::ifstream conf(ws.path("eval/confusion.tsv"));
    std::string line;
    std::getline(conf, line); // header
    std::size_t total = 0;
    while (std::getline(conf, line)) {
        std::istringstream is(line);
        std::string name;
        is >> name;
        std::size_t v, row_sum = 0;
        while (is >> v) row_sum += v;
        CHECK(row_sum == 30);
        total += row_sum;
    }
    CHECK(total == 60);

    // report summarizes the history
    RunResult rep = run_cli("report --history " + ws.path("runA/history.tsv"));
    CHECK(rep.exit_code == 0);
    CHECK(rep.output.find("steps 150") != std::string::npos);

    // a single-class dataset reduces accuracy to that class's recall
    {
        Rng rng(1);
        auto be32 = [](std::ofstream& f, std::uint32_t v) {
            const unsigned char b[4] = {
                static_cast<unsigned char>(v >> 24), static_cast<unsigned char>(v >> 16),
                static_cast<unsigned char>(v >> 8), static_cast<unsigned char>(v)};
            f.write(reinterpret_cast<const char*>(b), 4);
        };
        fs::create_directories(ws.path("single"));
        std::ofstream imgs(ws.dir / "single" / "t10k-images-idx3-ubyte", std::ios::binary);
        std::ofstream labs(ws.dir / "single" / "t10k-labels-idx1-ubyte", std::ios::binary);
        be32(imgs, 2051);
        be32(imgs, 20);
        be32(imgs, 28);
        be32(imgs, 28);
        be32(labs, 2049);
        be32(labs, 20);
        for (int i = 0; i < 20; ++i) {
            labs.put(0); // every sample is class 0 (bright left half)
            for (std::size_t y = 0; y < 28; ++y) {
                for (std::size_t x = 0; x < 28; ++x) {
                    const double base = x < 14 ? 200.0 : 40.0;
                    imgs.put(static_cast<char>(static_cast<unsigned char>(
                        std::clamp(base + rng.uniform(-30.0, 30.0), 0.0, 255.0))));
                }
            }
        }
        imgs.close();
        labs.close();
        fs::copy_file(ws.dir / "single" / "t10k-images-idx3-ubyte",
                      ws.dir / "single" / "train-images-idx3-ubyte");
        fs::copy_file(ws.dir / "single" / "t10k-labels-idx1-ubyte",
                      ws.dir / "single" / "train-labels-idx1-ubyte");
        RunResult sv = run_cli("eval --mnist " + ws.path("single") + " --split test --net " +
                               ws.path("tiny.net") + " --checkpoint " +
                               ws.path("runA/checkpoint.bin") + " --out " +
                               ws.path("eval_single"));
        CHECK(sv.exit_code == 0);
        // recall of class 0 from the confusion matrix equals the accuracy
        std::ifstream conf1(ws.path("eval_single/confusion.tsv"));
        std::string l;
        std::getline(conf1, l); // header
        std::getline(conf1, l); // class-0 row
        std::istringstream is(l);
        std::string name;
        is >> name;
        std::size_t right;
        is >> right; // diagonal entry for the only populated class
        const double sv_acc = std::stod(sv.output.substr(sv.output.find("accuracy") + 9));
        CHECK(sv_acc == doctest::Approx(static_cast<double>(right) / 20.0).epsilon(1e-12));
    }
}

TEST_CASE("train validates configuration and data errors distinctly") {
    Workspace ws;
    std::ofstream(ws.path("tiny.net")) << kTinyNet;
    // config error: bad lr
    CHECK(run_cli("train --mnist nowhere --net " + ws.path("tiny.net") + " --out " +
                  ws.path("x") + " --lr 0")
              .exit_code == 1);
    // data error: missing dataset
    CHECK(run_cli("train --mnist nowhere --net " + ws.path("tiny.net") + " --out " +
                  ws.path("x"))
              .exit_code == 2);
    // config error: no dataset options at all
    CHECK(run_cli("train --net " + ws.path("tiny.net") + " --out " + ws.path("x"))
              .exit_code == 1);
}

TEST_CASE("divergent training exits with the numeric-failure code") {
    Workspace ws;
    fs::create_directories(ws.path("data"));
    write_idx_pair(ws.dir / "data", 24, 17);
    // squared error keeps the loss unbounded so the blow-up is observable
    std::ofstream(ws.path("se.net")) << "input 28 28 1\nloss squared_error\nflatten\n"
                                        "dense units=2\n";
    RunResult res = run_cli("train --mnist " + ws.path("data") + " --net " +
                            ws.path("se.net") + " --out " + ws.path("run") +
                            " --steps 50 --batch 8 --lr 1e18 --optimizer sgd"
                            " --eval-every 0");
    CHECK(res.exit_code == 3);
    CHECK(res.output.find("aborted") != std::string::npos);
}

TEST_CASE("knn produces the report grid and verifies repeat determinism") {
    Workspace ws;
    fs::create_directories(ws.path("data"));
    write_idx_pair(ws.dir / "data", 80, 3);

    RunResult res = run_cli("knn --mnist " + ws.path("data") +
                            " --variants raw --metric minkowski --p 2 --k 1 3 5"
                            " --repeats 20 --out " + ws.path("knn"));
    CHECK(res.exit_code == 0);
    CHECK(res.output.find("identical: yes") != std::string::npos);
    std::ifstream rep(ws.path("knn/knn_report.tsv"));
    std::string header;
    std::getline(rep, header);
    CHECK(header == "k\tRAW");
    std::size_t rows = 0;
    std::string line;
    while (std::getline(rep, line)) {
        if (!line.empty()) ++rows;
    }
    CHECK(rows == 3);

    RunResult rep2 = run_cli("report --knn " + ws.path("knn/knn_report.tsv"));
    CHECK(rep2.exit_code == 0);
}

TEST_CASE("saliency and activations write their artifacts") {
    Workspace ws;
    fs::create_directories(ws.path("data"));
    write_idx_pair(ws.dir / "data", 40, 13);
    std::ofstream(ws.path("tiny.net")) << kTinyNet;

    RunResult tr = run_cli("train --mnist " + ws.path("data") + " --net " +
                           ws.path("tiny.net") + " --steps 40 --batch 10 --lr 0.003"
                           " --eval-every 0 --out " + ws.path("run"));
    REQUIRE(tr.exit_code == 0);

    // probe image: bright-left (class 0 pattern)
    Tensor img({28, 28, 3}, 0.1);
    for (std::size_t y = 0; y < 28; ++y) {
        for (std::size_t x = 0; x < 14; ++x) {
            img(y, x, 0) = img(y, x, 1) = img(y, x, 2) = 0.8;
        }
    }
    write_ppm(ws.path("probe.ppm"), img);

    RunResult sa = run_cli("saliency --checkpoint " + ws.path("run/checkpoint.bin") +
                           " --net " + ws.path("tiny.net") + " --image " +
                           ws.path("probe.ppm") + " --box 7 --stride 7 --out " +
                           ws.path("sal"));
    CHECK(sa.exit_code == 0);
    CHECK(fs::exists(ws.path("sal/heat.tsv")));
    CHECK(fs::exists(ws.path("sal/heat.pgm")));
    CHECK(fs::exists(ws.path("sal/overlay.png")));
    // stride == box: 4x4 grid for 28 px
    std::ifstream heat(ws.path("sal/heat.tsv"));
    std::string line;
    std::size_t rows = 0, cols = 0;
    while (std::getline(heat, line)) {
        if (line.empty()) continue;
        ++rows;
        cols = 1 + static_cast<std::size_t>(std::count(line.begin(), line.end(), '\t'));
    }
    CHECK(rows == 4);
    CHECK(cols == 4);

    // zero-weight checkpoint produces an identically zero heat map
    NetworkSpec spec = load_network_spec(ws.path("tiny.net"));
    Network zero(spec, 1);
    for (Tensor* p : zero.params()) p->fill(0.0);
    save_checkpoint(ws.path("zero.bin"), zero);
    RunResult sz = run_cli("saliency --checkpoint " + ws.path("zero.bin") + " --net " +
                           ws.path("tiny.net") + " --image " + ws.path("probe.ppm") +
                           " --box 7 --stride 7 --out " + ws.path("salzero"));
    CHECK(sz.exit_code == 0);
    std::ifstream zheat(ws.path("salzero/heat.tsv"));
    while (std::getline(zheat, line)) {
        std::istringstream is(line);
        double v;
        while (is >> v) CHECK(v == 0.0);
    }

    // activations on a conv topology: channel counts match the config
    std::ofstream(ws.path("conv.net")) << "input 28 28 1\nloss cross_entropy\n"
                                          "conv kernel=3 channels=6\nrelu\n"
                                          "maxpool window=2 stride=2\nflatten\n"
                                          "dense units=2\n";
    NetworkSpec conv_spec = load_network_spec(ws.path("conv.net"));
    Network conv_net(conv_spec, 2);
    save_checkpoint(ws.path("conv.bin"), conv_net);
    RunResult ac = run_cli("activations --checkpoint " + ws.path("conv.bin") + " --net " +
                           ws.path("conv.net") + " --image " + ws.path("probe.ppm") +
                           " --out " + ws.path("act"));
    CHECK(ac.exit_code == 0);
    CHECK(fs::exists(ws.path("act/layer00_conv.png")));
    CHECK(fs::exists(ws.path("act/layer01_relu.png")));
    CHECK(fs::exists(ws.path("act/layer02_maxpool.png")));
    std::ifstream stats(ws.path("act/activation_stats.tsv"));
    std::getline(stats, line); // header
    std::size_t conv_channels = 0;
    while (std::getline(stats, line)) {
        if (line.rfind("0\tconv", 0) == 0) ++conv_channels;
    }
    CHECK(conv_channels == 6);

    // checkpoint/spec mismatch is a data error
    CHECK(run_cli("saliency --checkpoint " + ws.path("conv.bin") + " --net " +
                  ws.path("tiny.net") + " --image " + ws.path("probe.ppm") + " --out " +
                  ws.path("salbad"))
              .exit_code == 2);
}
