#include "camforge/analysis.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstddef>
#include <cstdio>
#include <map>
#include <sstream>

#include "camforge/error.hpp"
#include "camforge/fbank.hpp"
#include "camforge/ops.hpp"
#include "camforge/rng.hpp"

namespace camforge {

namespace {

// Parameter elements per row, grouped by the name prefix up to the module
// boundary, so row sums always equal the store's total.
std::vector<LayerRow> param_rows(const Model& model) {
    std::vector<LayerRow> rows;
    std::map<std::string, size_t> index;
    auto row_for = [&](const std::string& name) -> LayerRow& {
        auto it = index.find(name);
        if (it != index.end()) return rows[it->second];
        index[name] = rows.size();
        rows.push_back({name, 0, 0, 0});
        return rows.back();
    };

    for (const auto& p : model.store().params()) {
        std::string group;
        const std::string& n = p->name;
        if (n.rfind("fcm.", 0) == 0 || n.rfind("head.", 0) == 0) {
            group = n.substr(0, n.find('.', n.find('.') + 1));
        } else {
            // backbone.<unit>[.layer<i>].<leaf>...
            size_t dot1 = n.find('.');
            size_t dot2 = n.find('.', dot1 + 1);
            if (n.compare(dot1 + 1, 5, "block") == 0) dot2 = n.find('.', dot2 + 1);
            group = n.substr(0, dot2);
        }
        row_for(group).param_count += p->value.numel();
    }
    return rows;
}

struct FlopWalker {
    std::vector<LayerRow> rows;

    LayerRow& row(const std::string& name) {
        rows.push_back({name, 0, 0, 0});
        return rows.back();
    }

    static int64_t bn_flops(int64_t channels, int64_t positions) { return 2 * channels * positions; }
};

} // namespace

int64_t conv1d_macs(int64_t cout, int64_t cin, int64_t kernel, int64_t out_len) {
    return cout * cin * kernel * out_len;
}

int64_t conv2d_macs(int64_t cout, int64_t cin, int64_t kh, int64_t kw, int64_t out_h,
                    int64_t out_w) {
    return cout * cin * kh * kw * out_h * out_w;
}

int64_t linear_macs(int64_t dout, int64_t din, int64_t batch) { return dout * din * batch; }

ComplexityReport count_params(const Model& model) {
    ComplexityReport r;
    r.rows = param_rows(model);
    for (const LayerRow& row : r.rows) r.total_params += row.param_count;
    return r;
}

int64_t frames_for_seconds(double seconds) {
    if (!(seconds > 0.0)) throw InputError("audio duration must be positive");
    FbankConfig fc;
    int64_t samples = static_cast<int64_t>(std::llround(seconds * fc.sample_rate));
    return fc.num_frames(samples);
}

ComplexityReport count_flops(const Model& model, int64_t input_frames) {
    const ModelConfig& c = model.config();
    if (input_frames < c.min_input_frames())
        throw InputError("need at least " + std::to_string(c.min_input_frames()) +
                         " frames for preset " + c.name + ", got " + std::to_string(input_frames));

    // Params per module first; macs/flops filled in below against the same
    // row names.
    std::vector<LayerRow> rows = param_rows(model);
    for (size_t i = 0; i < rows.size(); ++i) {
        if (rows[i].name == "head.linear") {
            rows.insert(rows.begin() + std::ptrdiff_t(i), {"head.pool", 0, 0, 0});
            break;
        }
    }
    std::map<std::string, size_t> index;
    for (size_t i = 0; i < rows.size(); ++i) index[rows[i].name] = i;
    auto fill = [&](const std::string& name, int64_t macs, int64_t extra_flops) {
        auto it = index.find(name);
        if (it == index.end()) {
            index[name] = rows.size();
            rows.push_back({name, 0, 0, 0});
            it = index.find(name);
        }
        rows[it->second].macs += macs;
        rows[it->second].flops += 2 * macs + extra_flops;
    };

    int64_t t = input_frames;
    if (c.fcm.enabled) {
        const int64_t ch = c.fcm.channels;
        const int64_t k = c.fcm.kernel;
        const int64_t pad = (k - 1) / 2;
        int64_t f = ops::conv_axis_out_len(c.feat_dim, k, 1, 1, pad);
        // stem: conv + bn + relu
        fill("fcm.stem", conv2d_macs(ch, 1, k, k, f, t), 2 * ch * f * t + ch * f * t);
        for (size_t i = 0; i < c.fcm.freq_strides.size(); ++i) {
            int64_t sf = c.fcm.freq_strides[i];
            int64_t f1 = ops::conv_axis_out_len(f, k, sf, 1, pad);
            int64_t elems = ch * f1 * t;
            int64_t macs = 2 * conv2d_macs(ch, ch, k, k, f1, t); // conv1 + conv2
            int64_t extra = 2 * FlopWalker::bn_flops(ch, f1 * t) // bn1 + bn2
                            + 2 * elems                          // relu after bn1, relu after add
                            + elems;                             // skip add
            if (sf != 1) {
                macs += conv2d_macs(ch, ch, 1, 1, f1, t); // 1x1 projection
                extra += FlopWalker::bn_flops(ch, f1 * t);
            }
            fill("fcm.block" + std::to_string(i), macs, extra);
            f = f1;
        }
    }

    int64_t cin = c.backbone_input_channels();
    int64_t t1 = ops::conv_axis_out_len(t, c.input_tdnn.kernel, c.input_tdnn.stride, 1,
                                        (c.input_tdnn.kernel - 1) / 2);
    fill("backbone.input", conv1d_macs(c.input_tdnn.out_channels, cin, c.input_tdnn.kernel, t1),
         FlopWalker::bn_flops(c.input_tdnn.out_channels, t1) + c.input_tdnn.out_channels * t1);

    int64_t ch = c.input_tdnn.out_channels;
    for (size_t bi = 0; bi < c.blocks.size(); ++bi) {
        const BlockSpec& bs = c.blocks[bi];
        for (int64_t li = 0; li < bs.num_layers; ++li) {
            int64_t macs = 0, extra = 0;
            extra += FlopWalker::bn_flops(ch, t1) + ch * t1;           // bn1 + relu
            macs += conv1d_macs(bs.bottleneck, ch, 1, t1);             // 1x1 fnn
            extra += FlopWalker::bn_flops(bs.bottleneck, t1) + bs.bottleneck * t1; // bn2 + relu
            macs += conv1d_macs(bs.growth, bs.bottleneck, bs.kernel, t1); // tdnn
            if (c.use_cam) {
                int64_t segs = ops::segment_count(t1, c.segment_length);
                extra += 2 * bs.bottleneck * t1;        // global + segment mean pooling
                extra += bs.bottleneck * segs;          // add global into each segment column
                macs += conv1d_macs(c.cam_hidden, bs.bottleneck, 1, segs);
                extra += c.cam_hidden * segs * 2;       // bias + relu
                macs += conv1d_macs(bs.growth, c.cam_hidden, 1, segs);
                extra += bs.growth * segs * 2;          // bias + sigmoid
                extra += bs.growth * t1;                // apply mask
            }
            fill("backbone.block" + std::to_string(bi) + ".layer" + std::to_string(li), macs, extra);
            ch += bs.growth;
        }
        int64_t cout = static_cast<int64_t>(std::llround(ch * c.transition_compression));
        fill("backbone.trans" + std::to_string(bi), conv1d_macs(cout, ch, 1, t1),
             FlopWalker::bn_flops(ch, t1) + ch * t1);
        ch = cout;
    }

    fill("backbone.out", 0, FlopWalker::bn_flops(ch, t1) + ch * t1);
    fill("head.pool", 0, 3 * ch * t1);
    fill("head.linear", linear_macs(c.embedding_dim, 2 * ch), 0);
    fill("head.bn", 0, 2 * c.embedding_dim);

    ComplexityReport r;
    r.rows = std::move(rows);
    for (const LayerRow& row : r.rows) {
        r.total_params += row.param_count;
        r.total_macs += row.macs;
        r.total_flops += row.flops;
    }
    r.input_frames = input_frames;
    r.input_seconds = double(input_frames - 1) * 0.010 + 0.025;
    std::ostringstream conv;
    conv << "flops = 2*macs + 1 add per bias element; batchnorm 2 flops/element; "
         << "relu/sigmoid/mean 1 flop/element; statistics pooling 3 flops/element; "
         << "padded taps counted; input " << input_frames << " frames";
    r.flop_convention = conv.str();
    return r;
}

namespace {

std::string human_count(int64_t n) {
    char buf[64];
    if (n >= 100000000) {
        std::snprintf(buf, sizeof buf, "%.2f G", double(n) / 1e9);
    } else if (n >= 100000) {
        std::snprintf(buf, sizeof buf, "%.2f M", double(n) / 1e6);
    } else {
        std::snprintf(buf, sizeof buf, "%lld", static_cast<long long>(n));
    }
    return buf;
}

} // namespace

std::string format_human(const ComplexityReport& report) {
    size_t name_w = 5;
    for (const LayerRow& r : report.rows) name_w = std::max(name_w, r.name.size());
    std::ostringstream o;
    bool with_flops = report.input_frames > 0;
    o << std::left;
    o.width(std::streamsize(name_w + 2));
    o << "layer";
    o << std::right;
    o.width(12);
    o << "params";
    if (with_flops) {
        o.width(14);
        o << "macs";
        o.width(14);
        o << "flops";
    }
    o << "\n";
    auto line = [&](const std::string& name, int64_t p, int64_t m, int64_t f) {
        o << std::left;
        o.width(std::streamsize(name_w + 2));
        o << name;
        o << std::right;
        o.width(12);
        o << p;
        if (with_flops) {
            o.width(14);
            o << m;
            o.width(14);
            o << f;
        }
        o << "\n";
    };
    for (const LayerRow& r : report.rows) line(r.name, r.param_count, r.macs, r.flops);
    line("total", report.total_params, report.total_macs, report.total_flops);
    o << "total params " << report.total_params << " (" << human_count(report.total_params) << ")\n";
    if (with_flops) {
        o << "total flops " << report.total_flops << " (" << human_count(report.total_flops)
          << ") at " << report.input_frames << " frames\n";
        o << "convention: " << report.flop_convention << "\n";
    }
    return o.str();
}

std::string format_machine(const ComplexityReport& report) {
    std::ostringstream o;
    for (const LayerRow& r : report.rows)
        o << r.name << "\t" << r.param_count << "\t" << r.macs << "\t" << r.flops << "\n";
    o << "total\t" << report.total_params << "\t" << report.total_macs << "\t"
      << report.total_flops << "\n";
    return o.str();
}

RtfResult benchmark_rtf(const Model& model, double audio_seconds, const RtfOptions& opts) {
    if (opts.repeats < 3) throw InputError("benchmark needs at least 3 repeats, got " +
                                           std::to_string(opts.repeats));
    if (!(audio_seconds > 0.0)) throw InputError("audio duration must be positive");

    std::function<double()> now = opts.clock;
    if (!now) {
        now = [] {
            auto t = std::chrono::steady_clock::now().time_since_epoch();
            return std::chrono::duration<double>(t).count();
        };
    }

    FbankConfig fc;
    int64_t samples = static_cast<int64_t>(std::llround(audio_seconds * fc.sample_rate));
    int64_t frames = fc.num_frames(samples);
    if (frames < model.config().min_input_frames())
        throw InputError(std::to_string(audio_seconds) + " s of audio gives " +
                         std::to_string(frames) + " frames; preset " + model.config().name +
                         " needs " + std::to_string(model.config().min_input_frames()));

    Rng rng(opts.seed);
    Audio audio;
    Tensor features;
    if (opts.include_features) {
        audio.sample_rate = fc.sample_rate;
        audio.samples.resize(size_t(samples));
        for (float& s : audio.samples) s = float(rng.uniform(-0.9, 0.9));
    } else {
        features = Tensor({model.config().feat_dim, frames});
        for (int64_t i = 0; i < features.numel(); ++i) features[i] = float(rng.normal());
    }

    auto run_once = [&] {
        if (opts.include_features) {
            Tensor f = fbank(audio.samples, fc);
            (void)model.extract_embedding(f);
        } else {
            (void)model.extract_embedding(features);
        }
    };

    run_once(); // warmup

    RtfResult res;
    res.audio_seconds = audio_seconds;
    res.threads = 1;
    res.walls.reserve(size_t(opts.repeats));
    for (int i = 0; i < opts.repeats; ++i) {
        double t0 = now();
        run_once();
        double t1 = now();
        res.walls.push_back(t1 - t0);
    }
    std::vector<double> sorted = res.walls;
    std::sort(sorted.begin(), sorted.end());
    size_t n = sorted.size();
    res.median_wall = (n % 2 == 1) ? sorted[n / 2] : 0.5 * (sorted[n / 2 - 1] + sorted[n / 2]);
    res.min_wall = sorted.front();
    res.max_wall = sorted.back();
    res.rtf = res.median_wall / audio_seconds;
    return res;
}

} // namespace camforge
