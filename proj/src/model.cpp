#include "camforge/model.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

namespace camforge {

// ---------------------------------------------------------------------------
// ModelConfig

void ModelConfig::validate() const {
    if (feat_dim < 1) throw ConfigError("feat_dim must be positive");
    if (blocks.empty()) throw ConfigError("at least one dense block required");
    for (const BlockSpec& b : blocks) {
        if (b.num_layers < 1 || b.growth < 1 || b.bottleneck < 1)
            throw ConfigError("block layer/growth/bottleneck counts must be positive");
        if (b.kernel < 1 || b.kernel % 2 == 0)
            throw ConfigError("block kernel must be odd (length-preserving padding), got " +
                              std::to_string(b.kernel));
        if (b.dilation < 1) throw ConfigError("block dilation must be positive");
    }
    if (!(transition_compression > 0.0) || transition_compression > 1.0)
        throw ConfigError("transition_compression must be in (0,1]");
    if (use_cam && cam_hidden < 1) throw ConfigError("cam_hidden must be positive");
    if (segment_length < 1) throw ConfigError("segment_length must be positive");
    if (embedding_dim < 1) throw ConfigError("embedding_dim must be positive");
    if (input_tdnn.out_channels < 1 || input_tdnn.kernel < 1 || input_tdnn.stride < 1)
        throw ConfigError("input layer channels/kernel/stride must be positive");
    if (input_tdnn.kernel % 2 == 0)
        throw ConfigError("input layer kernel must be odd, got " +
                          std::to_string(input_tdnn.kernel));
    if (fcm.enabled) {
        if (fcm.channels < 1) throw ConfigError("fcm channels must be positive");
        if (fcm.kernel < 1 || fcm.kernel % 2 == 0)
            throw ConfigError("fcm kernel must be odd");
        if (fcm.freq_strides.empty()) throw ConfigError("fcm needs at least one block");
        int64_t prod = 1;
        for (int64_t s : fcm.freq_strides) {
            if (s < 1) throw ConfigError("fcm frequency strides must be positive");
            prod *= s;
        }
        if (feat_dim % prod != 0)
            throw ConfigError("fcm downsampling " + std::to_string(prod) +
                              "x does not divide feat_dim " + std::to_string(feat_dim));
    }
}

int64_t ModelConfig::backbone_input_channels() const {
    if (!fcm.enabled) return feat_dim;
    int64_t prod = 1;
    for (int64_t s : fcm.freq_strides) prod *= s;
    return fcm.channels * (feat_dim / prod);
}

int64_t ModelConfig::min_input_frames() const {
    ops::Conv1dGeom g{input_tdnn.stride, 1, (input_tdnn.kernel - 1) / 2};
    for (int64_t t = 1; t <= 1024; ++t) {
        int64_t span = input_tdnn.kernel;
        if (t + 2 * g.padding < span) continue;
        if (ops::conv_axis_out_len(t, input_tdnn.kernel, g.stride, 1, g.padding) >= 2) return t;
    }
    throw ConfigError("input layer geometry admits no workable input length");
}

const std::vector<std::string>& ModelConfig::preset_names() {
    static const std::vector<std::string> names = {"campp", "dtdnn_vanilla", "dtdnn_l",
                                                   "dtdnn_cam_gp_sp", "tiny"};
    return names;
}

ModelConfig ModelConfig::preset(const std::string& name) {
    ModelConfig c;
    c.name = name;
    if (name == "campp") {
        c.fcm.enabled = true;
        c.input_tdnn = {128, 5, 2};
        c.blocks = {{12, 32, 128, 3, 1}, {24, 32, 128, 3, 2}, {16, 32, 128, 3, 2}};
        c.use_cam = true;
        c.cam_hidden = 64;
    } else if (name == "dtdnn_l") {
        c.fcm.enabled = false;
        c.input_tdnn = {128, 5, 2};
        c.blocks = {{12, 32, 128, 3, 1}, {24, 32, 128, 3, 2}, {16, 32, 128, 3, 2}};
        c.use_cam = false;
    } else if (name == "dtdnn_vanilla") {
        c.fcm.enabled = false;
        c.input_tdnn = {128, 5, 1};
        c.blocks = {{6, 64, 128, 3, 1}, {12, 64, 128, 3, 2}};
        c.use_cam = false;
    } else if (name == "dtdnn_cam_gp_sp") {
        c.fcm.enabled = false;
        c.input_tdnn = {128, 5, 1};
        c.blocks = {{6, 64, 128, 3, 1}, {12, 64, 128, 3, 2}};
        c.use_cam = true;
        c.cam_hidden = 64;
    } else if (name == "tiny") {
        c.fcm.enabled = false;
        c.input_tdnn = {32, 5, 2};
        c.blocks = {{2, 8, 32, 3, 1}, {2, 8, 32, 3, 2}};
        c.use_cam = true;
        c.cam_hidden = 16;
        c.embedding_dim = 32;
    } else {
        std::string all;
        for (const auto& n : preset_names()) all += (all.empty() ? "" : ", ") + n;
        throw ConfigError("unknown preset '" + name + "' (available: " + all + ")");
    }
    c.validate();
    return c;
}

namespace {

std::string trim(const std::string& s) {
    size_t a = s.find_first_not_of(" \t\r\n");
    if (a == std::string::npos) return "";
    size_t b = s.find_last_not_of(" \t\r\n");
    return s.substr(a, b - a + 1);
}

std::vector<int64_t> parse_int_list(const std::string& s, const std::string& key, int line) {
    std::vector<int64_t> out;
    std::stringstream ss(s);
    std::string item;
    while (std::getline(ss, item, ',')) {
        item = trim(item);
        try {
            size_t used = 0;
            out.push_back(std::stoll(item, &used));
            if (used != item.size()) throw std::invalid_argument(item);
        } catch (const std::exception&) {
            throw FormatError("config line " + std::to_string(line) + ": bad integer '" + item +
                              "' for " + key);
        }
    }
    if (out.empty())
        throw FormatError("config line " + std::to_string(line) + ": empty list for " + key);
    return out;
}

bool parse_bool(const std::string& s, const std::string& key, int line) {
    if (s == "true" || s == "1") return true;
    if (s == "false" || s == "0") return false;
    throw FormatError("config line " + std::to_string(line) + ": bad boolean '" + s + "' for " +
                      key);
}

std::string join_ints(const std::vector<int64_t>& v) {
    std::string s;
    for (size_t i = 0; i < v.size(); ++i) s += (i ? "," : "") + std::to_string(v[i]);
    return s;
}

} // namespace

std::string ModelConfig::to_text() const {
    std::ostringstream o;
    o << "# model architecture\n";
    o << "name = " << name << "\n";
    o << "feat_dim = " << feat_dim << "\n";
    o << "use_fcm = " << (fcm.enabled ? "true" : "false") << "\n";
    o << "fcm_channels = " << fcm.channels << "\n";
    o << "fcm_freq_strides = " << join_ints(fcm.freq_strides) << "\n";
    o << "fcm_kernel = " << fcm.kernel << "\n";
    o << "input_channels = " << input_tdnn.out_channels << "\n";
    o << "input_kernel = " << input_tdnn.kernel << "\n";
    o << "input_stride = " << input_tdnn.stride << "\n";
    std::vector<int64_t> nl, gr, bo, ke, di;
    for (const BlockSpec& b : blocks) {
        nl.push_back(b.num_layers);
        gr.push_back(b.growth);
        bo.push_back(b.bottleneck);
        ke.push_back(b.kernel);
        di.push_back(b.dilation);
    }
    o << "block_layers = " << join_ints(nl) << "\n";
    o << "block_growth = " << join_ints(gr) << "\n";
    o << "block_bottleneck = " << join_ints(bo) << "\n";
    o << "block_kernel = " << join_ints(ke) << "\n";
    o << "block_dilation = " << join_ints(di) << "\n";
    o << "transition_compression = " << transition_compression << "\n";
    o << "use_cam = " << (use_cam ? "true" : "false") << "\n";
    o << "cam_hidden = " << cam_hidden << "\n";
    o << "segment_length = " << segment_length << "\n";
    o << "embedding_dim = " << embedding_dim << "\n";
    return o.str();
}

ModelConfig ModelConfig::from_file(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw IoError("cannot open config file " + path);
    ModelConfig c;
    c.name = "custom";
    c.blocks.clear();
    std::vector<int64_t> nl, gr, bo, ke, di;
    bool have_layers = false;
    std::string raw;
    int line = 0;
    while (std::getline(f, raw)) {
        ++line;
        std::string s = trim(raw);
        if (s.empty() || s[0] == '#') continue;
        size_t eq = s.find('=');
        if (eq == std::string::npos)
            throw FormatError("config line " + std::to_string(line) + ": expected 'key = value'");
        std::string key = trim(s.substr(0, eq));
        std::string val = trim(s.substr(eq + 1));
        auto as_int = [&]() {
            try {
                size_t used = 0;
                int64_t v = std::stoll(val, &used);
                if (used != val.size()) throw std::invalid_argument(val);
                return v;
            } catch (const std::exception&) {
                throw FormatError("config line " + std::to_string(line) + ": bad integer '" +
                                  val + "' for " + key);
            }
        };
        if (key == "name") c.name = val;
        else if (key == "feat_dim") c.feat_dim = as_int();
        else if (key == "use_fcm") c.fcm.enabled = parse_bool(val, key, line);
        else if (key == "fcm_channels") c.fcm.channels = as_int();
        else if (key == "fcm_freq_strides") c.fcm.freq_strides = parse_int_list(val, key, line);
        else if (key == "fcm_kernel") c.fcm.kernel = as_int();
        else if (key == "input_channels") c.input_tdnn.out_channels = as_int();
        else if (key == "input_kernel") c.input_tdnn.kernel = as_int();
        else if (key == "input_stride") c.input_tdnn.stride = as_int();
        else if (key == "block_layers") { nl = parse_int_list(val, key, line); have_layers = true; }
        else if (key == "block_growth") gr = parse_int_list(val, key, line);
        else if (key == "block_bottleneck") bo = parse_int_list(val, key, line);
        else if (key == "block_kernel") ke = parse_int_list(val, key, line);
        else if (key == "block_dilation") di = parse_int_list(val, key, line);
        else if (key == "transition_compression") {
            try {
                c.transition_compression = std::stod(val);
            } catch (const std::exception&) {
                throw FormatError("config line " + std::to_string(line) + ": bad number '" + val +
                                  "'");
            }
        }
        else if (key == "use_cam") c.use_cam = parse_bool(val, key, line);
        else if (key == "cam_hidden") c.cam_hidden = as_int();
        else if (key == "segment_length") c.segment_length = as_int();
        else if (key == "embedding_dim") c.embedding_dim = as_int();
        else throw FormatError("config line " + std::to_string(line) + ": unknown key '" + key +
                               "'");
    }
    if (!have_layers) throw ConfigError("config file " + path + " does not define block_layers");
    auto pick = [&](const std::vector<int64_t>& v, int64_t dflt, size_t i) {
        if (v.empty()) return dflt;
        if (v.size() == 1) return v[0];
        if (v.size() != nl.size())
            throw ConfigError("config block_* lists must have matching lengths");
        return v[i];
    };
    for (size_t i = 0; i < nl.size(); ++i) {
        BlockSpec b;
        b.num_layers = nl[i];
        b.growth = pick(gr, 32, i);
        b.bottleneck = pick(bo, 128, i);
        b.kernel = pick(ke, 3, i);
        b.dilation = pick(di, 1, i);
        c.blocks.push_back(b);
    }
    c.validate();
    return c;
}

// ---------------------------------------------------------------------------
// module forwards

Var BatchNorm::forward(Tape* tape, const Var& x, bool train) const {
    const auto shape = x.value().shape();
    if (shape.size() == 3) {
        // 2d feature maps normalize per channel over both spatial axes
        Var flat = vop::reshape(tape, x, {shape[0], shape[1] * shape[2]});
        return vop::reshape(tape, forward(tape, flat, train), shape);
    }
    Var g = make_leaf(*gamma), b = make_leaf(*beta);
    if (!train)
        return vop::batchnorm_infer(tape, x, g, b, running_mean->value, running_var->value, eps);
    Tensor bm, bv;
    Var y = vop::batchnorm_train(tape, x, g, b, eps, &bm, &bv);
    float* rm = running_mean->value.data();
    float* rv = running_var->value.data();
    for (int64_t i = 0; i < bm.numel(); ++i) {
        rm[i] = (1.0f - momentum) * rm[i] + momentum * bm[i];
        rv[i] = (1.0f - momentum) * rv[i] + momentum * bv[i];
    }
    return y;
}

Var Conv1dModule::forward(Tape* tape, const Var& x) const {
    return vop::conv1d(tape, x, make_leaf(*w), b ? make_leaf(*b) : Var(), geom);
}

Var Conv2dModule::forward(Tape* tape, const Var& x) const {
    return vop::conv2d(tape, x, make_leaf(*w), b ? make_leaf(*b) : Var(), geom);
}

Var DenseLayer::forward(Tape* tape, const Var& x, bool train) const {
    Var a = vop::relu(tape, bn1.forward(tape, x, train));
    Var hidden = fnn.forward(tape, a); // the layer's context feature X
    Var b = vop::relu(tape, bn2.forward(tape, hidden, train));
    Var f = tdnn.forward(tape, b);
    if (use_cam) {
        Var e_g = vop::global_mean(tape, hidden);
        Var e_s = vop::segment_mean(tape, hidden, segment_length);
        f = vop::cam_mask(tape, f, e_g, e_s, make_leaf(*cam.w1), make_leaf(*cam.b1),
                          make_leaf(*cam.w2), make_leaf(*cam.b2), segment_length);
    }
    return vop::concat0(tape, x, f);
}

Var Transition::forward(Tape* tape, const Var& x, bool train) const {
    return conv.forward(tape, vop::relu(tape, bn.forward(tape, x, train)));
}

Var FcmBlock::forward(Tape* tape, const Var& x, bool train) const {
    Var h = vop::relu(tape, bn1.forward(tape, conv1.forward(tape, x), train));
    h = bn2.forward(tape, conv2.forward(tape, h), train);
    Var sc = projected ? proj_bn.forward(tape, proj.forward(tape, x), train) : x;
    return vop::relu(tape, vop::add(tape, h, sc));
}

Var Fcm::forward(Tape* tape, const Var& x, bool train) const {
    int64_t f = x.value().dim(0), t = x.value().dim(1);
    Var y = vop::reshape(tape, x, {1, f, t});
    y = vop::relu(tape, stem_bn.forward(tape, stem.forward(tape, y), train));
    for (const FcmBlock& b : blocks) y = b.forward(tape, y, train);
    const auto& s = y.value().shape();
    return vop::reshape(tape, y, {s[0] * s[1], s[2]});
}

// ---------------------------------------------------------------------------
// model construction

namespace {

BatchNorm make_bn(ParameterStore& st, const std::string& prefix, int64_t c) {
    BatchNorm bn;
    bn.gamma = &st.add(prefix + ".gamma", {c}, InitSpec::ones());
    bn.beta = &st.add(prefix + ".beta", {c}, InitSpec::zeros());
    bn.running_mean = &st.add_buffer(prefix + ".running_mean", {c}, 0.0f);
    bn.running_var = &st.add_buffer(prefix + ".running_var", {c}, 1.0f);
    return bn;
}

Conv1dModule make_conv1d(ParameterStore& st, const std::string& name, int64_t cout, int64_t cin,
                         int64_t k, ops::Conv1dGeom geom) {
    Conv1dModule m;
    m.w = &st.add(name + ".w", {cout, cin, k}, InitSpec::kaiming(cin * k));
    m.geom = geom;
    return m;
}

Conv2dModule make_conv2d(ParameterStore& st, const std::string& name, int64_t cout, int64_t cin,
                         int64_t k, ops::Conv2dGeom geom) {
    Conv2dModule m;
    m.w = &st.add(name + ".w", {cout, cin, k, k}, InitSpec::kaiming(cin * k * k));
    m.geom = geom;
    return m;
}

} // namespace

Model::Model(ModelConfig cfg, uint64_t seed) : cfg_(std::move(cfg)) {
    cfg_.validate();
    const ModelConfig& c = cfg_;

    if (c.fcm.enabled) {
        int64_t ch = c.fcm.channels;
        int64_t pad = (c.fcm.kernel - 1) / 2;
        fcm.stem = make_conv2d(store_, "fcm.stem.conv", ch, 1, c.fcm.kernel,
                               {1, 1, pad, pad});
        fcm.stem_bn = make_bn(store_, "fcm.stem.bn", ch);
        for (size_t i = 0; i < c.fcm.freq_strides.size(); ++i) {
            std::string p = "fcm.block" + std::to_string(i);
            int64_t sf = c.fcm.freq_strides[i];
            FcmBlock b;
            b.freq_stride = sf;
            b.conv1 = make_conv2d(store_, p + ".conv1", ch, ch, c.fcm.kernel, {sf, 1, pad, pad});
            b.bn1 = make_bn(store_, p + ".bn1", ch);
            b.conv2 = make_conv2d(store_, p + ".conv2", ch, ch, c.fcm.kernel, {1, 1, pad, pad});
            b.bn2 = make_bn(store_, p + ".bn2", ch);
            if (sf != 1) {
                b.projected = true;
                b.proj = make_conv2d(store_, p + ".proj", ch, ch, 1, {sf, 1, 0, 0});
                b.proj_bn = make_bn(store_, p + ".proj_bn", ch);
            }
            fcm.blocks.push_back(b);
        }
        int64_t prod = 1;
        for (int64_t s : c.fcm.freq_strides) prod *= s;
        fcm.out_channels = ch * (c.feat_dim / prod);
    }

    int64_t cin = c.backbone_input_channels();
    input_conv = make_conv1d(store_, "backbone.input.conv", c.input_tdnn.out_channels, cin,
                             c.input_tdnn.kernel,
                             {c.input_tdnn.stride, 1, (c.input_tdnn.kernel - 1) / 2});
    input_bn = make_bn(store_, "backbone.input.bn", c.input_tdnn.out_channels);

    int64_t ch = c.input_tdnn.out_channels;
    for (size_t bi = 0; bi < c.blocks.size(); ++bi) {
        const BlockSpec& bs = c.blocks[bi];
        std::vector<DenseLayer> layers;
        for (int64_t li = 0; li < bs.num_layers; ++li) {
            std::string p = "backbone.block" + std::to_string(bi) + ".layer" + std::to_string(li);
            DenseLayer dl;
            dl.bn1 = make_bn(store_, p + ".fnn.bn", ch);
            dl.fnn = make_conv1d(store_, p + ".fnn.conv", bs.bottleneck, ch, 1, {1, 1, 0});
            dl.bn2 = make_bn(store_, p + ".tdnn.bn", bs.bottleneck);
            dl.tdnn = make_conv1d(store_, p + ".tdnn.conv", bs.growth, bs.bottleneck, bs.kernel,
                                  {1, bs.dilation, bs.dilation * (bs.kernel - 1) / 2});
            dl.use_cam = c.use_cam;
            dl.segment_length = c.segment_length;
            if (c.use_cam) {
                dl.cam.w1 = &store_.add(p + ".cam.w1", {c.cam_hidden, bs.bottleneck, 1},
                                        InitSpec::kaiming(bs.bottleneck));
                dl.cam.b1 = &store_.add(p + ".cam.b1", {c.cam_hidden}, InitSpec::zeros());
                dl.cam.w2 = &store_.add(p + ".cam.w2", {bs.growth, c.cam_hidden, 1},
                                        InitSpec::kaiming(c.cam_hidden));
                dl.cam.b2 = &store_.add(p + ".cam.b2", {bs.growth}, InitSpec::zeros());
            }
            layers.push_back(dl);
            ch += bs.growth;
        }
        blocks.push_back(std::move(layers));
        std::string tp = "backbone.trans" + std::to_string(bi);
        int64_t cout = static_cast<int64_t>(std::llround(ch * c.transition_compression));
        if (cout < 1) throw ConfigError("transition compression collapses " + std::to_string(ch) +
                                        " channels to zero");
        Transition tr;
        tr.bn = make_bn(store_, tp + ".bn", ch);
        tr.conv = make_conv1d(store_, tp + ".conv", cout, ch, 1, {1, 1, 0});
        transitions.push_back(tr);
        ch = cout;
    }

    out_bn = make_bn(store_, "backbone.out.bn", ch);
    head.linear_w = &store_.add("head.linear.w", {c.embedding_dim, 2 * ch},
                                InitSpec::kaiming(2 * ch));
    head.bn = make_bn(store_, "head.bn", c.embedding_dim);

    store_.initialize(seed);
}

Var Model::forward_to_pre_embedding(Tape* tape, const Var& features, bool train) const {
    const Tensor& f = features.value();
    if (f.ndim() != 2 || f.dim(0) != cfg_.feat_dim)
        throw ConfigError("expected features with " + std::to_string(cfg_.feat_dim) +
                          " frequency bins, got " + f.shape_str());
    int64_t min_t = cfg_.min_input_frames();
    if (f.dim(1) < min_t)
        throw InputError("input has " + std::to_string(f.dim(1)) + " frames; preset " +
                         cfg_.name + " requires at least " + std::to_string(min_t));
    Var x = features;
    if (cfg_.fcm.enabled) x = fcm.forward(tape, x, train);
    x = vop::relu(tape, input_bn.forward(tape, input_conv.forward(tape, x), train));
    for (size_t bi = 0; bi < blocks.size(); ++bi) {
        for (const DenseLayer& dl : blocks[bi]) x = dl.forward(tape, x, train);
        x = transitions[bi].forward(tape, x, train);
    }
    x = vop::relu(tape, out_bn.forward(tape, x, train));
    Var pooled = vop::stats_pool(tape, x, 1e-10f);
    return vop::linear(tape, pooled, make_leaf(*head.linear_w), Var());
}

Tensor Model::extract_embedding(const Tensor& features) const {
    Var pre = forward_to_pre_embedding(nullptr, make_input(features), false);
    Var emb = head.bn.forward(nullptr, pre, false);
    return emb.value();
}

Var Model::head_bn_train(Tape* tape, const Var& stacked) const {
    return head.bn.forward(tape, stacked, true);
}

Model build_model(const std::string& preset, uint64_t seed) {
    return Model(ModelConfig::preset(preset), seed);
}

} // namespace camforge
