#include "camforge/cli.hpp"

#include <algorithm>
#include <atomic>
#include <cctype>
#include <exception>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <map>
#include <mutex>
#include <sstream>
#include <thread>

#include <CLI11.hpp>

#include "camforge/analysis.hpp"
#include "camforge/error.hpp"
#include "camforge/fbank.hpp"
#include "camforge/log.hpp"
#include "camforge/model.hpp"
#include "camforge/scoring.hpp"
#include "camforge/training.hpp"
#include "camforge/wav.hpp"
#include "camforge/weights.hpp"

namespace camforge {

namespace {

constexpr uint64_t kDefaultSeed = 17;

ModelConfig resolve_config(const std::string& preset, const std::string& config_path) {
    if (preset.empty() && config_path.empty())
        throw UsageError("give --preset or --config");
    if (!preset.empty() && !config_path.empty())
        throw UsageError("give only one of --preset and --config");
    if (!preset.empty()) return ModelConfig::preset(preset);
    return ModelConfig::from_file(config_path);
}

Model make_model(const ModelConfig& cfg, const std::string& weights_path, uint64_t seed) {
    if (!weights_path.empty()) return load_weights(cfg, weights_path);
    LOG_INFO("no --weights given; initializing " << cfg.name << " from seed " << seed);
    return Model(cfg, seed);
}

bool has_wav_extension(const std::string& path) {
    auto dot = path.find_last_of('.');
    if (dot == std::string::npos) return false;
    std::string ext = path.substr(dot + 1);
    std::transform(ext.begin(), ext.end(), ext.begin(),
                   [](unsigned char c) { return char(std::tolower(c)); });
    return ext == "wav";
}

std::string utterance_id(const std::string& path) {
    std::string base = std::filesystem::path(path).filename().string();
    auto dot = base.find_last_of('.');
    if (dot != std::string::npos && dot > 0) base = base.substr(0, dot);
    if (base.empty()) throw InputError("cannot derive an utterance id from " + path);
    return base;
}

struct EmbedInput {
    std::string id;
    std::string wav_path; // empty when features are preloaded
    Tensor features;
};

int cmd_embed(const std::vector<std::string>& inputs, const std::string& out_path,
              const Model& model, int threads, std::ostream& out) {
    std::vector<EmbedInput> work;
    for (const std::string& in : inputs) {
        if (has_wav_extension(in)) {
            work.push_back({utterance_id(in), in, Tensor()});
        } else {
            for (auto& [name, feats] : read_tensor_records(in))
                work.push_back({name, "", std::move(feats)});
        }
    }
    {
        std::map<std::string, int> seen;
        for (const EmbedInput& w : work)
            if (++seen[w.id] > 1) throw InputError("duplicate utterance id " + w.id);
    }

    std::vector<Tensor> embeddings(work.size());
    std::atomic<size_t> next{0};
    std::exception_ptr first_error;
    std::mutex error_mu;
    auto worker = [&] {
        for (;;) {
            size_t i = next.fetch_add(1);
            if (i >= work.size()) return;
            try {
                Tensor feats = work[i].wav_path.empty()
                                   ? std::move(work[i].features)
                                   : fbank(read_wav(work[i].wav_path), FbankConfig{});
                embeddings[i] = model.extract_embedding(feats);
            } catch (...) {
                std::lock_guard<std::mutex> lock(error_mu);
                if (!first_error) first_error = std::current_exception();
                return;
            }
        }
    };
    size_t nthreads = std::min<size_t>(size_t(std::max(threads, 1)), std::max<size_t>(work.size(), 1));
    if (nthreads <= 1) {
        worker();
    } else {
        std::vector<std::thread> pool;
        for (size_t i = 0; i < nthreads; ++i) pool.emplace_back(worker);
        for (auto& th : pool) th.join();
    }
    if (first_error) std::rethrow_exception(first_error);

    std::vector<std::pair<std::string, Tensor>> records;
    records.reserve(work.size());
    for (size_t i = 0; i < work.size(); ++i)
        records.emplace_back(work[i].id, std::move(embeddings[i]));
    save_embeddings(out_path, records);
    out << "wrote " << records.size() << " embeddings to " << out_path << "\n";
    return 0;
}

const Tensor& test_embedding(const std::map<std::string, Tensor>& store, const std::string& id) {
    auto it = store.find(id);
    if (it == store.end()) throw InputError("no embedding for test utterance " + id);
    return it->second;
}

// Exact id match wins; otherwise all utterances named `<id>_*` are averaged.
Tensor enroll_embedding(const std::map<std::string, Tensor>& store, const std::string& id) {
    auto it = store.find(id);
    if (it != store.end()) return it->second;
    std::vector<Tensor> members;
    std::string prefix = id + "_";
    for (auto lo = store.lower_bound(prefix); lo != store.end(); ++lo) {
        if (lo->first.compare(0, prefix.size(), prefix) != 0) break;
        members.push_back(lo->second);
    }
    if (members.empty()) throw InputError("no embedding for enrollment id " + id);
    return average_enrollment(members);
}

int cmd_score(const std::string& embeddings_path, const std::string& trials_path,
              const std::string& out_path, std::ostream& out) {
    auto store = load_embeddings(embeddings_path);
    TrialSet trials = parse_trials(trials_path);
    trials.scores.reserve(trials.pairs.size());
    std::map<std::string, Tensor> enroll_cache;
    for (const TrialPair& p : trials.pairs) {
        auto it = enroll_cache.find(p.enroll_id);
        if (it == enroll_cache.end())
            it = enroll_cache.emplace(p.enroll_id, enroll_embedding(store, p.enroll_id)).first;
        trials.scores.push_back(cosine_score(it->second, test_embedding(store, p.test_id)));
    }
    write_scores(trials, out_path);
    out << "wrote " << trials.scores.size() << " scores to " << out_path << "\n";
    return 0;
}

int cmd_eval(const std::string& trials_path, const std::string& scores_path, double p_target,
             double c_miss, double c_fa, std::ostream& out) {
    TrialSet trials = parse_trials(trials_path);
    attach_scores(trials, scores_path);
    EerResult eer = compute_eer(trials);
    DcfResult dcf = compute_mindcf(trials, p_target, c_miss, c_fa);
    out << "EER " << std::fixed << std::setprecision(4) << eer.eer << " minDCF " << dcf.mindcf
        << "\n";
    return 0;
}

int cmd_analyze(const ModelConfig& cfg, int64_t frames, double seconds, bool machine, bool sweep,
                bool params_only, std::ostream& out) {
    Model model(cfg, kDefaultSeed);
    if (params_only) {
        ComplexityReport r = count_params(model);
        out << (machine ? format_machine(r) : format_human(r));
        return 0;
    }
    if (sweep) {
        out << "duration_s\tframes\tflops_mac_x1\tflops_mac_x2\n";
        for (int s = 1; s <= 3; ++s) {
            int64_t f = frames_for_seconds(double(s));
            ComplexityReport r = count_flops(model, f);
            out << s << "\t" << f << "\t" << (r.total_flops - r.total_macs) << "\t"
                << r.total_flops << "\n";
        }
        return 0;
    }
    if (seconds > 0.0) frames = frames_for_seconds(seconds);
    ComplexityReport r = count_flops(model, frames);
    out << (machine ? format_machine(r) : format_human(r));
    return 0;
}

int cmd_bench(const Model& model, double seconds, int repeats, bool include_features,
              uint64_t seed, std::ostream& out) {
    RtfOptions opts;
    opts.repeats = repeats;
    opts.include_features = include_features;
    opts.seed = seed;
    RtfResult r = benchmark_rtf(model, seconds, opts);
    out << std::fixed;
    out << "threads " << r.threads << "\n";
    out << "audio_seconds " << std::setprecision(3) << r.audio_seconds << "\n";
    out << "repeats " << r.walls.size() << "\n";
    out << std::setprecision(6);
    out << "wall_median " << r.median_wall << "\n";
    out << "wall_min " << r.min_wall << "\n";
    out << "wall_max " << r.max_wall << "\n";
    out << "rtf " << r.rtf << "\n";
    return 0;
}

std::vector<std::pair<std::string, std::string>> toy_wav_list(const std::string& manifest,
                                                              const std::string& data_dir) {
    std::vector<std::pair<std::string, std::string>> wavs; // path, speaker
    if (!manifest.empty()) {
        std::ifstream in(manifest);
        if (!in) throw IoError("cannot open manifest " + manifest);
        std::string line;
        size_t line_no = 0;
        while (std::getline(in, line)) {
            ++line_no;
            if (!line.empty() && line.back() == '\r') line.pop_back();
            if (line.empty() || line[0] == '#') continue;
            auto tab = line.find('\t');
            if (tab == std::string::npos || tab == 0 || tab + 1 >= line.size())
                throw FormatError(manifest + ":" + std::to_string(line_no) +
                                  ": expected 'path<TAB>speaker_id'");
            wavs.emplace_back(line.substr(0, tab), line.substr(tab + 1));
        }
    } else {
        if (!std::filesystem::is_directory(data_dir))
            throw InputError(data_dir + " is not a directory");
        std::vector<std::string> paths;
        for (const auto& entry : std::filesystem::directory_iterator(data_dir)) {
            if (entry.is_regular_file() && has_wav_extension(entry.path().string()))
                paths.push_back(entry.path().string());
        }
        std::sort(paths.begin(), paths.end());
        for (const std::string& p : paths) {
            std::string base = utterance_id(p);
            auto us = base.find('_');
            if (us == std::string::npos || us == 0)
                throw FormatError(p + ": toy wav names must look like <speaker>_<utt>.wav");
            wavs.emplace_back(p, base.substr(0, us));
        }
    }
    if (wavs.empty()) throw InputError("no training wavs found");
    return wavs;
}

int cmd_train_toy(const ModelConfig& cfg, const std::string& manifest, const std::string& data_dir,
                  int64_t steps, int64_t warmup, double lr_max, double lr_min, uint64_t seed,
                  int64_t crop_frames, const std::string& out_path, std::ostream& out) {
    auto wavs = toy_wav_list(manifest, data_dir);

    std::vector<std::string> speakers;
    for (auto& [path, spk] : wavs) speakers.push_back(spk);
    std::sort(speakers.begin(), speakers.end());
    speakers.erase(std::unique(speakers.begin(), speakers.end()), speakers.end());
    std::map<std::string, int64_t> label_of;
    for (size_t i = 0; i < speakers.size(); ++i) label_of[speakers[i]] = int64_t(i);

    std::vector<ToySample> data;
    data.reserve(wavs.size());
    for (auto& [path, spk] : wavs)
        data.push_back({fbank(read_wav(path), FbankConfig{}), label_of[spk]});

    ScheduleConfig schedule;
    schedule.lr_max = float(lr_max);
    schedule.lr_min = float(lr_min);
    schedule.warmup_steps = warmup;
    schedule.total_steps = steps;

    ToyFitOptions opts;
    opts.seed = seed;
    opts.crop_frames = crop_frames;

    Model model(cfg, seed);
    ToyFitResult result = toy_fit(model, data, schedule, steps, opts);

    out << std::fixed << std::setprecision(6);
    for (size_t i = 0; i < result.loss_trace.size(); ++i)
        out << "step " << (i + 1) << " loss " << result.loss_trace[i] << "\n";
    out << "classes " << result.num_classes << "\n";
    out << "accuracy " << std::setprecision(3) << result.train_accuracy << "\n";
    if (!out_path.empty()) {
        save_weights(model, out_path);
        out << "wrote " << out_path << "\n";
    }
    return 0;
}

int cmd_init(const ModelConfig& cfg, uint64_t seed, const std::string& out_path,
             std::ostream& out) {
    Model model(cfg, seed);
    save_weights(model, out_path);
    out << "wrote " << out_path << " (" << model.store().total_params() << " params)\n";
    return 0;
}

} // namespace

int run_cli(std::vector<std::string> args, std::ostream& out, std::ostream& err) {
    init_log_from_env();

    CLI::App app{"CAM-style speaker embedding toolkit"};
    app.require_subcommand(1);

    std::string preset, config_path, weights_path;
    uint64_t seed = kDefaultSeed;

    auto add_model_flags = [&](CLI::App* sub, bool with_weights) {
        sub->add_option("--preset", preset, "built-in architecture preset");
        sub->add_option("--config", config_path, "architecture config file");
        sub->add_option("--seed", seed, "random seed (default 17)");
        if (with_weights) sub->add_option("--weights", weights_path, "weight file to load");
    };

    // embed
    auto* embed = app.add_subcommand("embed", "extract embeddings from WAV or feature files");
    std::vector<std::string> embed_inputs;
    std::string embed_out;
    int embed_threads = 1;
    add_model_flags(embed, true);
    embed->add_option("inputs", embed_inputs, "WAV files or feature record files")->required();
    embed->add_option("--out", embed_out, "output embedding file")->required();
    embed->add_option("--threads", embed_threads, "worker threads (default 1)")
        ->check(CLI::Range(1, 256));

    // score
    auto* score = app.add_subcommand("score", "score trial pairs with cosine similarity");
    std::string score_embeddings, score_trials, score_out;
    score->add_option("--embeddings", score_embeddings, "embedding file from `embed`")->required();
    score->add_option("--trials", score_trials, "trial list")->required();
    score->add_option("--out", score_out, "output score file")->required();

    // eval
    auto* eval = app.add_subcommand("eval", "compute EER and minDCF from scored trials");
    std::string eval_trials, eval_scores;
    double p_target = 0.01, c_miss = 1.0, c_fa = 1.0;
    eval->add_option("--trials", eval_trials, "trial list")->required();
    eval->add_option("--scores", eval_scores, "score file")->required();
    eval->add_option("--p-target", p_target, "target prior (default 0.01)");
    eval->add_option("--c-miss", c_miss, "miss cost (default 1)");
    eval->add_option("--c-fa", c_fa, "false-accept cost (default 1)");

    // analyze
    auto* analyze = app.add_subcommand("analyze", "parameter and FLOP accounting");
    int64_t analyze_frames = 98;
    double analyze_seconds = 0.0;
    bool analyze_machine = false, analyze_sweep = false, analyze_params_only = false;
    add_model_flags(analyze, false);
    analyze->add_option("--frames", analyze_frames, "input length in frames (default 98 = 1 s)");
    analyze->add_option("--duration-seconds", analyze_seconds, "input length as audio duration");
    analyze->add_flag("--machine", analyze_machine, "tab-separated output");
    analyze->add_flag("--sweep", analyze_sweep, "FLOP totals for 1/2/3 s and both MAC conventions");
    analyze->add_flag("--params-only", analyze_params_only, "skip FLOP accounting");

    // bench
    auto* bench = app.add_subcommand("bench", "single-thread RTF benchmark");
    double bench_seconds = 10.0;
    int bench_repeats = 5;
    bool bench_features = false;
    add_model_flags(bench, true);
    bench->add_option("--duration-seconds", bench_seconds, "synthetic audio length (default 10)");
    bench->add_option("--repeats", bench_repeats, "timed runs (default 5, min 3)");
    bench->add_flag("--include-features", bench_features, "time feature extraction too");

    // train-toy
    auto* train = app.add_subcommand("train-toy", "overfit a toy wav set end to end");
    std::string train_manifest, train_dir, train_out;
    int64_t train_steps = 200, train_warmup = 20, train_crop = 298;
    double train_lr_max = 0.1, train_lr_min = 1e-4;
    add_model_flags(train, false);
    train->add_option("--manifest", train_manifest, "lines of path<TAB>speaker_id");
    train->add_option("--data-dir", train_dir, "directory of <speaker>_<utt>.wav files");
    train->add_option("--steps", train_steps, "SGD steps (default 200)");
    train->add_option("--warmup-steps", train_warmup, "warmup steps (default 20)");
    train->add_option("--lr-max", train_lr_max, "peak learning rate (default 0.1)");
    train->add_option("--lr-min", train_lr_min, "final learning rate (default 1e-4)");
    train->add_option("--crop-frames", train_crop, "random crop length (default 298 = 3 s)");
    train->add_option("--out", train_out, "weight file to write after training");

    // init
    auto* init = app.add_subcommand("init", "write seed-initialized weights");
    std::string init_out;
    add_model_flags(init, false);
    init->add_option("--out", init_out, "output weight file")->required();

    std::reverse(args.begin(), args.end());
    try {
        app.parse(std::move(args));

        if (embed->parsed()) {
            ModelConfig cfg = resolve_config(preset, config_path);
            Model model = make_model(cfg, weights_path, seed);
            return cmd_embed(embed_inputs, embed_out, model, embed_threads, out);
        }
        if (score->parsed()) return cmd_score(score_embeddings, score_trials, score_out, out);
        if (eval->parsed()) return cmd_eval(eval_trials, eval_scores, p_target, c_miss, c_fa, out);
        if (analyze->parsed()) {
            ModelConfig cfg = resolve_config(preset, config_path);
            return cmd_analyze(cfg, analyze_frames, analyze_seconds, analyze_machine,
                               analyze_sweep, analyze_params_only, out);
        }
        if (bench->parsed()) {
            ModelConfig cfg = resolve_config(preset, config_path);
            Model model = make_model(cfg, weights_path, seed);
            return cmd_bench(model, bench_seconds, bench_repeats, bench_features, seed, out);
        }
        if (train->parsed()) {
            if (train_manifest.empty() == train_dir.empty())
                throw UsageError("give exactly one of --manifest and --data-dir");
            std::string name = preset.empty() && config_path.empty() ? "tiny" : preset;
            ModelConfig cfg =
                config_path.empty() ? ModelConfig::preset(name) : ModelConfig::from_file(config_path);
            return cmd_train_toy(cfg, train_manifest, train_dir, train_steps, train_warmup,
                                 train_lr_max, train_lr_min, seed, train_crop, train_out, out);
        }
        if (init->parsed()) {
            ModelConfig cfg = resolve_config(preset, config_path);
            return cmd_init(cfg, seed, init_out, out);
        }
        throw UsageError("no subcommand given");
    } catch (const CLI::CallForHelp&) {
        auto parsed = app.get_subcommands();
        out << (parsed.size() == 1 ? parsed[0]->help() : app.help());
        return 0;
    } catch (const CLI::CallForAllHelp&) {
        out << app.help("", CLI::AppFormatMode::All);
        return 0;
    } catch (const CLI::CallForVersion&) {
        out << app.version() << "\n";
        return 0;
    } catch (const CLI::ParseError& e) {
        err << "error: usage: " << e.what() << "\n";
        return 2;
    } catch (const UsageError& e) {
        err << "error: usage: " << e.what() << "\n";
        return 2;
    } catch (const Error& e) {
        err << "error: " << e.category() << ": " << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        err << "error: internal: " << e.what() << "\n";
        return 1;
    }
}

} // namespace camforge
