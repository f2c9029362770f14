#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "camforge/cli.hpp"
#include "camforge/log.hpp"
#include "camforge/scoring.hpp"
#include "camforge/wav.hpp"
#include "camforge/weights.hpp"

using namespace camforge;
namespace fs = std::filesystem;

namespace {

const std::string kDir = "/tmp/camforge_cli";

struct RunResult {
    int code = 0;
    std::string out;
    std::string err;
};

RunResult run(std::vector<std::string> args) {
    std::ostringstream out, err;
    RunResult r;
    r.code = run_cli(std::move(args), out, err);
    r.out = out.str();
    r.err = err.str();
    return r;
}

std::string path_in(const std::string& name) { return kDir + "/" + name; }

std::vector<char> slurp(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    REQUIRE(bool(f));
    return std::vector<char>((std::istreambuf_iterator<char>(f)),
                             std::istreambuf_iterator<char>());
}

// two synthetic "speakers": distinct harmonic stacks, slight per-utterance
// detuning so utterances differ
void write_toy_wav(const std::string& path, int speaker, int utt, double seconds = 0.6) {
    const int n = int(seconds * 16000);
    std::vector<float> s(static_cast<size_t>(n));
    double f0 = speaker == 0 ? 220.0 : 520.0;
    f0 += 3.0 * utt;
    for (int i = 0; i < n; ++i) {
        double t = double(i) / 16000.0;
        double v = 0.5 * std::sin(2.0 * M_PI * f0 * t) + 0.25 * std::sin(2.0 * M_PI * 2 * f0 * t) +
                   0.12 * std::sin(2.0 * M_PI * 3 * f0 * t);
        s[size_t(i)] = float(v);
    }
    write_wav(path, s, 16000);
}

Tensor vec3(float a, float b, float c) {
    Tensor t({3});
    t.data()[0] = a;
    t.data()[1] = b;
    t.data()[2] = c;
    return t;
}

} // namespace

TEST_CASE("setup scratch dir") {
    fs::create_directories(kDir);
    CHECK(fs::is_directory(kDir));
}

TEST_CASE("usage errors exit 2") {
    CHECK(run({"frobnicate"}).code == 2);
    CHECK(run({}).code == 2);

    RunResult r = run({"analyze"});
    CHECK(r.code == 2); // neither --preset nor --config
    CHECK(r.err.find("error: usage") != std::string::npos);

    std::string cfg = path_in("tiny.conf");
    std::ofstream(cfg) << "block_layers = 2,2\n";
    CHECK(run({"analyze", "--preset", "tiny", "--config", cfg}).code == 2);

    CHECK(run({"embed", "in.wav"}).code == 2);                       // missing --out
    CHECK(run({"train-toy", "--preset", "tiny"}).code == 2);         // no manifest or dir
    CHECK(run({"bench", "--preset", "tiny", "--repeats", "x"}).code == 2);
}

TEST_CASE("help exits 0 and names the subcommands") {
    RunResult r = run({"--help"});
    CHECK(r.code == 0);
    for (const char* sub : {"embed", "score", "eval", "analyze", "bench", "train-toy", "init"})
        CHECK(r.out.find(sub) != std::string::npos);

    RunResult sub = run({"analyze", "--help"});
    CHECK(sub.code == 0);
    CHECK(sub.out.find("--sweep") != std::string::npos);
}

TEST_CASE("analyze prints the pinned totals") {
    RunResult r = run({"analyze", "--preset", "campp", "--params-only"});
    CHECK(r.code == 0);
    CHECK(r.out.find("7169056") != std::string::npos);

    RunResult machine = run({"analyze", "--preset", "campp", "--machine"});
    CHECK(machine.code == 0);
    CHECK(machine.out.find("total\t7169056\t572711936\t1156690368\n") != std::string::npos);

    RunResult sweep = run({"analyze", "--preset", "campp", "--sweep"});
    CHECK(sweep.code == 0);
    CHECK(sweep.out.find("duration_s\tframes\tflops_mac_x1\tflops_mac_x2") != std::string::npos);
    CHECK(sweep.out.find("1\t98\t583978432\t1156690368") != std::string::npos);
    CHECK(sweep.out.find("3\t298\t") != std::string::npos);

    RunResult frames = run({"analyze", "--preset", "tiny", "--frames", "2"});
    CHECK(frames.code == 1); // below the model minimum
    CHECK(frames.err.find("error: input") != std::string::npos);
}

TEST_CASE("init writes weights that embed can reuse") {
    std::string weights = path_in("tiny.weights");
    RunResult r = run({"init", "--preset", "tiny", "--out", weights});
    CHECK(r.code == 0);
    CHECK(r.out.find("wrote " + weights) != std::string::npos);
    CHECK(r.out.find("26712") != std::string::npos);
    CHECK(fs::exists(weights));

    write_toy_wav(path_in("w0.wav"), 0, 0);
    RunResult e = run({"embed", path_in("w0.wav"), "--preset", "tiny", "--weights", weights,
                       "--out", path_in("one.emb")});
    CHECK(e.code == 0);
    CHECK(e.out.find("wrote 1 embeddings") != std::string::npos);
    auto loaded = load_embeddings(path_in("one.emb"));
    REQUIRE(loaded.size() == 1);
    CHECK(loaded.count("w0") == 1);
    CHECK(loaded.at("w0").numel() == 32);
}

TEST_CASE("embed output is seed deterministic and thread independent") {
    for (int u = 0; u < 3; ++u) write_toy_wav(path_in("spk0_u" + std::to_string(u) + ".wav"), 0, u);

    std::vector<std::string> inputs = {path_in("spk0_u0.wav"), path_in("spk0_u1.wav"),
                                       path_in("spk0_u2.wav")};
    auto embed_to = [&](const std::string& out, std::vector<std::string> extra) {
        std::vector<std::string> args = {"embed"};
        args.insert(args.end(), inputs.begin(), inputs.end());
        args.insert(args.end(), {"--preset", "tiny", "--out", out});
        args.insert(args.end(), extra.begin(), extra.end());
        REQUIRE(run(args).code == 0);
    };

    embed_to(path_in("a.emb"), {"--seed", "17"});
    embed_to(path_in("b.emb"), {"--seed", "17"});
    embed_to(path_in("c.emb"), {"--seed", "17", "--threads", "4"});
    embed_to(path_in("d.emb"), {"--seed", "99"});

    CHECK(slurp(path_in("a.emb")) == slurp(path_in("b.emb")));
    CHECK(slurp(path_in("a.emb")) == slurp(path_in("c.emb")));
    CHECK(slurp(path_in("a.emb")) != slurp(path_in("d.emb")));
}

TEST_CASE("embed rejects duplicate utterance ids") {
    fs::create_directories(path_in("dup"));
    write_toy_wav(path_in("w1.wav"), 0, 0);
    write_toy_wav(path_in("dup/w1.wav"), 1, 0);
    RunResult r = run({"embed", path_in("w1.wav"), path_in("dup/w1.wav"), "--preset", "tiny",
                       "--out", path_in("dup.emb")});
    CHECK(r.code == 1);
    CHECK(r.err.find("duplicate") != std::string::npos);
}

TEST_CASE("score averages enrollment prefixes and eval reports the metrics") {
    // hand-built separable embeddings: enrollment models use the spk_* prefix
    save_embeddings(path_in("sep.emb"), {
        {"spk1_a", vec3(1.0f, 0.0f, 0.0f)},
        {"spk1_b", vec3(0.9f, 0.1f, 0.0f)},
        {"spk2_a", vec3(0.0f, 1.0f, 0.0f)},
        {"spk2_b", vec3(0.0f, 0.9f, 0.1f)},
        {"t1", vec3(1.0f, 0.05f, 0.0f)},
        {"t2", vec3(0.0f, 1.0f, 0.05f)},
    });
    std::ofstream(path_in("sep.trials")) << "spk1 t1 target\n"
                                         << "spk1 t2 nontarget\n"
                                         << "spk2 t2 target\n"
                                         << "spk2 t1 nontarget\n";

    RunResult s = run({"score", "--embeddings", path_in("sep.emb"), "--trials",
                       path_in("sep.trials"), "--out", path_in("sep.scores")});
    CHECK(s.code == 0);
    CHECK(s.out.find("wrote 4 scores") != std::string::npos);

    TrialSet t = parse_trials(path_in("sep.trials"));
    attach_scores(t, path_in("sep.scores"));
    CHECK(t.scores[0] > 0.9);  // spk1 vs t1
    CHECK(t.scores[1] < 0.2);  // spk1 vs t2

    RunResult e = run({"eval", "--trials", path_in("sep.trials"), "--scores",
                       path_in("sep.scores")});
    CHECK(e.code == 0);
    CHECK(e.out == "EER 0.0000 minDCF 0.0000\n");
}

TEST_CASE("eval reports chance level for overlapping scores") {
    std::ofstream(path_in("flat.trials")) << "a x target\n"
                                          << "b y nontarget\n"
                                          << "c z target\n"
                                          << "d w nontarget\n";
    std::ofstream(path_in("flat.scores")) << "a x 0.100000\n"
                                          << "b y 0.100000\n"
                                          << "c z 0.900000\n"
                                          << "d w 0.900000\n";
    RunResult e = run({"eval", "--trials", path_in("flat.trials"), "--scores",
                       path_in("flat.scores")});
    CHECK(e.code == 0);
    CHECK(e.out.find("EER 0.5000") != std::string::npos);

    RunResult bad = run({"eval", "--trials", path_in("flat.scores"), "--scores",
                         path_in("flat.scores")});
    CHECK(bad.code == 1);
    CHECK(bad.err.find("error: format") != std::string::npos);
}

TEST_CASE("bench prints a single-thread timing block") {
    RunResult r = run({"bench", "--preset", "tiny", "--duration-seconds", "1", "--repeats", "3"});
    CHECK(r.code == 0);
    CHECK(r.out.find("threads 1\n") != std::string::npos);
    CHECK(r.out.find("audio_seconds 1.000\n") != std::string::npos);
    CHECK(r.out.find("repeats 3\n") != std::string::npos);
    CHECK(r.out.find("wall_median ") != std::string::npos);
    CHECK(r.out.find("rtf ") != std::string::npos);
}

TEST_CASE("train-toy overfits from a manifest") {
    for (int spk = 0; spk < 2; ++spk)
        for (int u = 0; u < 2; ++u)
            write_toy_wav(path_in("toy_s" + std::to_string(spk) + "_u" + std::to_string(u) + ".wav"),
                          spk, u);
    std::string manifest = path_in("toy.manifest");
    {
        std::ofstream m(manifest);
        m << "# toy training set\n";
        for (int spk = 0; spk < 2; ++spk)
            for (int u = 0; u < 2; ++u)
                m << path_in("toy_s" + std::to_string(spk) + "_u" + std::to_string(u) + ".wav")
                  << "\t" << "speaker" << spk << "\n";
    }

    RunResult r = run({"train-toy", "--manifest", manifest, "--steps", "5", "--warmup-steps", "1",
                       "--crop-frames", "30"});
    CHECK(r.code == 0);
    CHECK(r.out.find("step 1 loss ") != std::string::npos);
    CHECK(r.out.find("step 5 loss ") != std::string::npos);
    CHECK(r.out.find("classes 2\n") != std::string::npos);
    CHECK(r.out.find("accuracy ") != std::string::npos);

    // trained weights land in a loadable file
    std::string weights = path_in("toy.weights");
    RunResult rw = run({"train-toy", "--manifest", manifest, "--steps", "2", "--warmup-steps", "1",
                        "--crop-frames", "30", "--out", weights});
    CHECK(rw.code == 0);
    CHECK(fs::exists(weights));
    RunResult re = run({"embed", path_in("toy_s0_u0.wav"), "--preset", "tiny", "--weights",
                        weights, "--out", path_in("toy.emb")});
    CHECK(re.code == 0);

    // malformed manifest line is reported with its number
    std::string bad = path_in("bad.manifest");
    std::ofstream(bad) << path_in("toy_s0_u0.wav") << "\tspk\n"
                       << "no-tab-here\n";
    RunResult rb = run({"train-toy", "--manifest", bad, "--steps", "2"});
    CHECK(rb.code == 1);
    CHECK(rb.err.find(":2:") != std::string::npos);
}

TEST_CASE("train-toy scans a directory of speaker-prefixed wavs") {
    fs::create_directories(path_in("toydir"));
    for (int spk = 0; spk < 2; ++spk)
        for (int u = 0; u < 2; ++u)
            write_toy_wav(path_in("toydir/s" + std::to_string(spk) + "_u" + std::to_string(u) +
                                  ".wav"),
                          spk, u);
    RunResult r = run({"train-toy", "--data-dir", path_in("toydir"), "--steps", "3",
                       "--warmup-steps", "1", "--crop-frames", "30"});
    CHECK(r.code == 0);
    CHECK(r.out.find("classes 2\n") != std::string::npos);

    // names without a speaker prefix are rejected
    fs::create_directories(path_in("baddir"));
    write_toy_wav(path_in("baddir/nounderscore.wav"), 0, 0);
    RunResult rb = run({"train-toy", "--data-dir", path_in("baddir"), "--steps", "2"});
    CHECK(rb.code == 1);
    CHECK(rb.err.find("error: format") != std::string::npos);
}

TEST_CASE("embed reads feature record files as well as wavs") {
    Tensor feats({80, 40});
    for (int64_t i = 0; i < feats.numel(); ++i) feats.data()[i] = float(i % 7) * 0.1f;
    write_tensor_records(path_in("feats.bin"), {{"uttX", &feats}});

    RunResult r = run({"embed", path_in("feats.bin"), "--preset", "tiny", "--out",
                       path_in("featemb.emb")});
    CHECK(r.code == 0);
    auto loaded = load_embeddings(path_in("featemb.emb"));
    CHECK(loaded.count("uttX") == 1);
}

TEST_CASE("log level is controlled by the environment") {
    write_toy_wav(path_in("log.wav"), 0, 0);
    setenv("CAMFORGE_LOG", "info", 1);
    std::ostringstream captured;
    std::streambuf* old = std::cerr.rdbuf(captured.rdbuf());
    RunResult r = run({"embed", path_in("log.wav"), "--preset", "tiny", "--out",
                       path_in("log.emb")});
    std::cerr.rdbuf(old);
    unsetenv("CAMFORGE_LOG");
    set_log_level(LogLevel::warn);

    CHECK(r.code == 0);
    CHECK(captured.str().find("[info]") != std::string::npos);
    CHECK(captured.str().find("initializing") != std::string::npos);

    // default level keeps info quiet
    std::ostringstream quiet;
    old = std::cerr.rdbuf(quiet.rdbuf());
    run({"embed", path_in("log.wav"), "--preset", "tiny", "--out", path_in("log.emb")});
    std::cerr.rdbuf(old);
    CHECK(quiet.str().empty());
}
