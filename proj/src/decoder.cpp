#include "tactile/decoder.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <numeric>

#include "tactile/config.hpp"
#include "tactile/errors.hpp"
#include "tactile/hash.hpp"
#include "tactile/rng.hpp"

namespace tactile {

std::string to_string(Activation a) {
    switch (a) {
        case Activation::relu: return "relu";
        case Activation::tanh: return "tanh";
        case Activation::linear: return "linear";
    }
    return "?";
}

Activation activation_from_string(const std::string& s) {
    if (s == "relu") return Activation::relu;
    if (s == "tanh") return Activation::tanh;
    if (s == "linear") return Activation::linear;
    throw InvalidArgument("unknown activation '" + s + "'");
}

DecoderConfig DecoderConfig::tiny() {
    DecoderConfig c;
    c.conv = {{3, 2, 2}};
    c.hidden = 2;
    c.batch_size = 4;
    return c;
}

void DecoderConfig::validate() const {
    for (const auto& s : conv)
        if (s.kernel < 1 || s.channels < 1 || s.stride < 1) throw InvalidArgument("conv stages need positive sizes");
    if (hidden < 0) throw InvalidArgument("hidden width must be >= 0");
    if (!(learning_rate > 0.0)) throw InvalidArgument("learning_rate must be > 0");
    if (!(momentum >= 0.0 && momentum < 1.0)) throw InvalidArgument("momentum must lie in [0, 1)");
    if (batch_size < 1) throw InvalidArgument("batch_size must be >= 1");
    if (epochs < 1) throw InvalidArgument("epochs must be >= 1");
    if (patience < 1) throw InvalidArgument("patience must be >= 1");
    if (!(label_scale > 0.0)) throw InvalidArgument("label_scale must be > 0");
}

namespace {

struct Layer {
    bool conv;
    int in_c, in_h, in_w;
    int out_c, out_h, out_w;
    int k, stride;
    Activation act;
    std::size_t w_off, b_off;

    std::size_t in_size() const { return static_cast<std::size_t>(in_c) * in_h * in_w; }
    std::size_t out_size() const { return static_cast<std::size_t>(out_c) * out_h * out_w; }
    std::size_t fan_in() const { return conv ? static_cast<std::size_t>(in_c) * k * k : in_size(); }
};

struct Net {
    std::vector<Layer> layers;
    std::size_t n_params = 0;
};

Net build_net(const DecoderConfig& cfg) {
    cfg.validate();
    Net net;
    int c = 1, h = kGrid, w = kGrid;
    std::size_t off = 0;
    for (const auto& st : cfg.conv) {
        if (st.kernel > h || st.kernel > w) throw InvalidArgument("conv kernel larger than its input");
        Layer L{true, c, h, w, st.channels, (h - st.kernel) / st.stride + 1, (w - st.kernel) / st.stride + 1,
                st.kernel, st.stride, cfg.activation, 0, 0};
        L.w_off = off;
        off += static_cast<std::size_t>(L.out_c) * L.in_c * L.k * L.k;
        L.b_off = off;
        off += L.out_c;
        net.layers.push_back(L);
        c = L.out_c;
        h = L.out_h;
        w = L.out_w;
    }
    auto dense = [&](int out, Activation act) {
        Layer L{false, c, h, w, out, 1, 1, 0, 1, act, 0, 0};
        L.w_off = off;
        off += static_cast<std::size_t>(out) * L.in_size();
        L.b_off = off;
        off += out;
        net.layers.push_back(L);
        c = out;
        h = w = 1;
    };
    if (cfg.hidden > 0) dense(cfg.hidden, cfg.activation);
    dense(1, Activation::linear);
    net.n_params = off;
    return net;
}

double act_f(Activation a, double z) {
    switch (a) {
        case Activation::relu: return z > 0.0 ? z : 0.0;
        case Activation::tanh: return std::tanh(z);
        case Activation::linear: return z;
    }
    return z;
}

double act_d(Activation a, double z, double y) {
    switch (a) {
        case Activation::relu: return z > 0.0 ? 1.0 : 0.0;
        case Activation::tanh: return 1.0 - y * y;
        case Activation::linear: return 1.0;
    }
    return 1.0;
}

struct Workspace {
    std::vector<std::vector<double>> z;  // pre-activations per layer
    std::vector<std::vector<double>> a;  // a[0] input, a[l + 1] output of layer l
    std::vector<std::vector<double>> d;  // gradient w.r.t. a[l]

    explicit Workspace(const Net& net) {
        a.emplace_back(static_cast<std::size_t>(kCells));
        d.emplace_back(static_cast<std::size_t>(kCells));
        for (const auto& L : net.layers) {
            z.emplace_back(L.out_size());
            a.emplace_back(L.out_size());
            d.emplace_back(L.out_size());
        }
    }
};

double forward(const Net& net, const double* p, Workspace& ws) {
    for (std::size_t l = 0; l < net.layers.size(); ++l) {
        const Layer& L = net.layers[l];
        const double* in = ws.a[l].data();
        double* z = ws.z[l].data();
        double* out = ws.a[l + 1].data();
        if (L.conv) {
            for (int oc = 0; oc < L.out_c; ++oc) {
                const double* W = p + L.w_off + static_cast<std::size_t>(oc) * L.in_c * L.k * L.k;
                for (int oy = 0; oy < L.out_h; ++oy)
                    for (int ox = 0; ox < L.out_w; ++ox) {
                        double s = p[L.b_off + oc];
                        for (int ic = 0; ic < L.in_c; ++ic) {
                            const double* Wc = W + static_cast<std::size_t>(ic) * L.k * L.k;
                            const double* I = in + static_cast<std::size_t>(ic) * L.in_h * L.in_w;
                            for (int ky = 0; ky < L.k; ++ky) {
                                const double* row = I + (oy * L.stride + ky) * L.in_w + ox * L.stride;
                                for (int kx = 0; kx < L.k; ++kx) s += Wc[ky * L.k + kx] * row[kx];
                            }
                        }
                        const std::size_t o = (static_cast<std::size_t>(oc) * L.out_h + oy) * L.out_w + ox;
                        z[o] = s;
                        out[o] = act_f(L.act, s);
                    }
            }
        } else {
            const std::size_t n_in = L.in_size();
            for (int o = 0; o < L.out_c; ++o) {
                const double* W = p + L.w_off + static_cast<std::size_t>(o) * n_in;
                double s = p[L.b_off + o];
                for (std::size_t i = 0; i < n_in; ++i) s += W[i] * in[i];
                z[o] = s;
                out[o] = act_f(L.act, s);
            }
        }
    }
    return ws.a.back()[0];
}

// Accumulates d(out)/d(params) * dout into grad.
void backward(const Net& net, const double* p, Workspace& ws, double dout, double* grad) {
    ws.d.back()[0] = dout;
    for (std::size_t l = net.layers.size(); l-- > 0;) {
        const Layer& L = net.layers[l];
        const double* in = ws.a[l].data();
        double* din = ws.d[l].data();
        const bool need_din = l > 0;
        if (need_din) std::fill(ws.d[l].begin(), ws.d[l].end(), 0.0);
        const double* dout_v = ws.d[l + 1].data();
        const double* z = ws.z[l].data();
        const double* y = ws.a[l + 1].data();
        if (L.conv) {
            for (int oc = 0; oc < L.out_c; ++oc) {
                const std::size_t wbase = L.w_off + static_cast<std::size_t>(oc) * L.in_c * L.k * L.k;
                for (int oy = 0; oy < L.out_h; ++oy)
                    for (int ox = 0; ox < L.out_w; ++ox) {
                        const std::size_t o = (static_cast<std::size_t>(oc) * L.out_h + oy) * L.out_w + ox;
                        const double dz = dout_v[o] * act_d(L.act, z[o], y[o]);
                        if (dz == 0.0) continue;
                        grad[L.b_off + oc] += dz;
                        for (int ic = 0; ic < L.in_c; ++ic) {
                            const std::size_t wc = wbase + static_cast<std::size_t>(ic) * L.k * L.k;
                            const std::size_t ibase = static_cast<std::size_t>(ic) * L.in_h * L.in_w;
                            for (int ky = 0; ky < L.k; ++ky) {
                                const std::size_t r = ibase + (oy * L.stride + ky) * L.in_w + ox * L.stride;
                                for (int kx = 0; kx < L.k; ++kx) {
                                    grad[wc + ky * L.k + kx] += dz * in[r + kx];
                                    if (need_din) din[r + kx] += dz * p[wc + ky * L.k + kx];
                                }
                            }
                        }
                    }
            }
        } else {
            const std::size_t n_in = L.in_size();
            for (int o = 0; o < L.out_c; ++o) {
                const double dz = dout_v[o] * act_d(L.act, z[o], y[o]);
                if (dz == 0.0) continue;
                const std::size_t wb = L.w_off + static_cast<std::size_t>(o) * n_in;
                grad[L.b_off + o] += dz;
                for (std::size_t i = 0; i < n_in; ++i) {
                    grad[wb + i] += dz * in[i];
                    if (need_din) din[i] += dz * p[wb + i];
                }
            }
        }
    }
}

void load_input(const Normalization& norm, const Image32& img, Workspace& ws) {
    for (int i = 0; i < kCells; ++i) ws.a[0][i] = (static_cast<double>(img[i]) - norm.mean) / norm.scale;
}

std::vector<double> init_params(const Net& net, std::uint64_t seed) {
    std::vector<double> p(net.n_params, 0.0);
    Rng rng(seed, {0xdec0});
    for (const auto& L : net.layers) {
        const bool last = &L == &net.layers.back();
        const double gain = (L.act == Activation::relu && !last) ? 2.0 : 1.0;
        const double sd = std::sqrt(gain / static_cast<double>(L.fan_in()));
        for (std::size_t i = L.w_off; i < L.b_off; ++i) p[i] = sd * rng.normal();
    }
    return p;
}

// Mean of (f - y / S)^2 over the batch and its gradient (scaled units).
double batch_loss_grad(const Net& net, const std::vector<double>& p, const Normalization& norm, double label_scale,
                       const std::vector<const Image32*>& images, const std::vector<double>& labels,
                       const std::size_t* idx, std::size_t n, Workspace& ws, std::vector<double>* grad) {
    if (grad) std::fill(grad->begin(), grad->end(), 0.0);
    double loss = 0.0;
    for (std::size_t b = 0; b < n; ++b) {
        const std::size_t i = idx[b];
        load_input(norm, *images[i], ws);
        const double f = forward(net, p.data(), ws);
        const double e = f - labels[i] / label_scale;
        loss += e * e;
        if (grad) backward(net, p.data(), ws, 2.0 * e / static_cast<double>(n), grad->data());
    }
    return loss / static_cast<double>(n);
}

}  // namespace

std::size_t parameter_count(const DecoderConfig& config) { return build_net(config).n_params; }

Normalization compute_normalization(const std::vector<const Image32*>& images) {
    if (images.empty()) throw InvalidArgument("normalization needs training images");
    double sum = 0.0;
    for (const auto* img : images)
        for (float v : *img) sum += v;
    const double count = static_cast<double>(images.size()) * kCells;
    const double mean = sum / count;
    double var = 0.0;
    for (const auto* img : images)
        for (float v : *img) var += (v - mean) * (v - mean);
    const double sd = std::sqrt(var / count);
    return {mean, sd > 0.0 ? sd : 1.0};
}

DecoderModel initialize_model(const DecoderConfig& config, AfferentKind kind, const Normalization& norm,
                              std::uint64_t seed) {
    DecoderModel m;
    m.kind = kind;
    m.config = config;
    m.norm = norm;
    m.training_seed = seed;
    m.params = init_params(build_net(config), seed);
    return m;
}

double predict(const DecoderModel& model, const Image32& image) {
    const Net net = build_net(model.config);
    if (model.params.size() != net.n_params) throw InvalidArgument("model parameters do not match its config");
    Workspace ws(net);
    load_input(model.norm, image, ws);
    return model.config.label_scale * forward(net, model.params.data(), ws);
}

double predict(const DecoderModel& model, const TactileImage& image) {
    if (image.kind != model.kind)
        throw InvalidArgument("model decodes " + to_string(model.kind) + " images, got " + to_string(image.kind));
    Image32 img;
    for (int i = 0; i < kCells; ++i) img[i] = static_cast<float>(image.values[i]);
    return predict(model, img);
}

double evaluate_loss(const DecoderModel& model, const std::vector<const Image32*>& images,
                     const std::vector<double>& labels) {
    if (images.size() != labels.size() || images.empty()) throw InvalidArgument("images and labels must align");
    const Net net = build_net(model.config);
    Workspace ws(net);
    std::vector<std::size_t> idx(images.size());
    std::iota(idx.begin(), idx.end(), 0);
    const double s = model.config.label_scale;
    return s * s * batch_loss_grad(net, model.params, model.norm, s, images, labels, idx.data(), idx.size(), ws, nullptr);
}

std::vector<std::size_t> epoch_order(std::size_t n, std::uint64_t seed, int epoch) {
    std::vector<std::size_t> idx(n);
    std::iota(idx.begin(), idx.end(), 0);
    Rng rng(seed, {0xe90c, static_cast<std::uint64_t>(epoch)});
    for (std::size_t i = n; i > 1; --i) std::swap(idx[i - 1], idx[rng.below(i)]);
    return idx;
}

TrainResult train(const std::vector<const Image32*>& train_images, const std::vector<double>& train_labels,
                  const std::vector<const Image32*>& val_images, const std::vector<double>& val_labels,
                  AfferentKind kind, const DecoderConfig& config, std::uint64_t seed) {
    if (train_images.empty() || val_images.empty()) throw InvalidArgument("training needs train and val samples");
    if (train_images.size() != train_labels.size() || val_images.size() != val_labels.size())
        throw InvalidArgument("images and labels must align");
    for (double y : train_labels)
        if (!(y >= -90.0 && y <= 90.0)) throw InvalidArgument("labels must lie in [-90, 90]");
    for (double y : val_labels)
        if (!(y >= -90.0 && y <= 90.0)) throw InvalidArgument("labels must lie in [-90, 90]");

    const Net net = build_net(config);
    TrainResult res;
    DecoderModel& model = res.model;
    model = initialize_model(config, kind, compute_normalization(train_images), seed);
    TrainReport& rep = res.report;
    const double S = config.label_scale;

    Workspace ws(net);
    std::vector<double> grad(net.n_params), vel(net.n_params, 0.0);
    std::vector<double> best = model.params;
    double best_val = std::numeric_limits<double>::infinity();
    int since_best = 0;
    std::vector<std::size_t> val_idx(val_images.size());
    std::iota(val_idx.begin(), val_idx.end(), 0);

    for (int epoch = 0; epoch < config.epochs; ++epoch) {
        const auto order = epoch_order(train_images.size(), seed, epoch);
        double sum = 0.0;
        for (std::size_t start = 0; start < order.size(); start += config.batch_size) {
            const std::size_t n = std::min<std::size_t>(config.batch_size, order.size() - start);
            const double loss =
                batch_loss_grad(net, model.params, model.norm, S, train_images, train_labels, order.data() + start, n, ws, &grad);
            if (!std::isfinite(loss)) throw TrainingFailure("training diverged", epoch);
            if (epoch == 0 && start == 0) rep.first_batch_loss = S * S * loss;
            sum += loss * static_cast<double>(n);
            for (std::size_t i = 0; i < grad.size(); ++i) {
                vel[i] = config.momentum * vel[i] - config.learning_rate * grad[i];
                model.params[i] += vel[i];
            }
        }
        const double val = S * S *
            batch_loss_grad(net, model.params, model.norm, S, val_images, val_labels, val_idx.data(), val_idx.size(), ws, nullptr);
        if (!std::isfinite(val)) throw TrainingFailure("validation loss diverged", epoch);
        rep.train_loss.push_back(S * S * sum / static_cast<double>(order.size()));
        rep.val_loss.push_back(val);
        rep.epochs_run = epoch + 1;
        if (val < best_val) {
            best_val = val;
            best = model.params;
            rep.best_epoch = epoch;
            since_best = 0;
        } else if (++since_best >= config.patience) {
            break;
        }
    }
    model.params = best;
    double mae = 0.0;
    for (std::size_t i = 0; i < val_images.size(); ++i) mae += std::fabs(predict(model, *val_images[i]) - val_labels[i]);
    rep.val_mae = mae / static_cast<double>(val_images.size());
    return res;
}

TrainResult train(const Dataset& dataset, AfferentKind kind, const DecoderConfig& config, std::uint64_t seed) {
    // canonical order so the result does not depend on how samples were stored
    auto pick = [&](Split s) {
        auto v = dataset.select(s);
        std::stable_sort(v.begin(), v.end(), [](const LabeledSample* a, const LabeledSample* b) {
            return a->seed < b->seed;
        });
        std::vector<const Image32*> imgs;
        std::vector<double> labels;
        for (const auto* x : v) {
            imgs.push_back(kind == AfferentKind::SA1 ? &x->sa1 : &x->ra1);
            labels.push_back(x->psi);
        }
        return std::pair{imgs, labels};
    };
    auto [ti, tl] = pick(Split::train);
    auto [vi, vl] = pick(Split::val);
    return train(ti, tl, vi, vl, kind, config, seed);
}

double gradient_check(const DecoderConfig& config, std::uint64_t seed) {
    const Net net = build_net(config);
    Rng rng(seed, {0x9c});
    const std::size_t batch = static_cast<std::size_t>(std::max(2, std::min(config.batch_size, 4)));
    std::vector<Image32> imgs(batch);
    std::vector<double> labels(batch);
    for (auto& img : imgs)
        for (auto& v : img) v = static_cast<float>(rng.normal());
    for (auto& y : labels) y = rng.uniform(-90.0, 90.0);
    std::vector<const Image32*> ptrs;
    for (const auto& img : imgs) ptrs.push_back(&img);
    std::vector<std::size_t> idx(batch);
    std::iota(idx.begin(), idx.end(), 0);

    const Normalization norm{0.0, 1.0};
    std::vector<double> p = init_params(net, seed);
    // non-zero biases so every parameter is exercised
    for (const auto& L : net.layers)
        for (std::size_t i = L.b_off; i < L.b_off + static_cast<std::size_t>(L.out_c); ++i) p[i] = 0.1 * rng.normal();
    Workspace ws(net);
    std::vector<double> grad(net.n_params);
    const double S = config.label_scale;
    batch_loss_grad(net, p, norm, S, ptrs, labels, idx.data(), batch, ws, &grad);

    const double h = 1e-4;
    double worst = 0.0;
    for (std::size_t i = 0; i < p.size(); ++i) {
        const double keep = p[i];
        p[i] = keep + h;
        const double up = batch_loss_grad(net, p, norm, S, ptrs, labels, idx.data(), batch, ws, nullptr);
        p[i] = keep - h;
        const double dn = batch_loss_grad(net, p, norm, S, ptrs, labels, idx.data(), batch, ws, nullptr);
        p[i] = keep;
        const double num = (up - dn) / (2 * h);
        const double rel = std::fabs(grad[i] - num) / std::max({std::fabs(grad[i]), std::fabs(num), 1e-7});
        worst = std::max(worst, rel);
    }
    return worst;
}

// ---- model files ----------------------------------------------------------

namespace {

constexpr char kMagic[8] = {'T', 'A', 'C', 'T', 'D', 'E', 'C', '\0'};
constexpr std::uint32_t kModelVersion = 1;

template <class T>
void put(std::string& b, T v) {
    using U = std::conditional_t<sizeof(T) == 8, std::uint64_t, std::conditional_t<sizeof(T) == 4, std::uint32_t, std::uint8_t>>;
    const U u = std::bit_cast<U>(v);
    for (std::size_t k = 0; k < sizeof(T); ++k) b.push_back(static_cast<char>((u >> (8 * k)) & 0xff));
}

class Reader {
public:
    Reader(const std::string& b, std::size_t end) : b_(b), end_(end) {}
    template <class T>
    T get() {
        using U = std::conditional_t<sizeof(T) == 8, std::uint64_t, std::conditional_t<sizeof(T) == 4, std::uint32_t, std::uint8_t>>;
        need(sizeof(T));
        U u = 0;
        for (std::size_t k = 0; k < sizeof(T); ++k) u |= static_cast<U>(static_cast<unsigned char>(b_[pos_ + k])) << (8 * k);
        pos_ += sizeof(T);
        return std::bit_cast<T>(u);
    }
    std::string bytes(std::size_t n) {
        need(n);
        std::string s = b_.substr(pos_, n);
        pos_ += n;
        return s;
    }
    std::size_t pos() const { return pos_; }

private:
    void need(std::size_t n) {
        if (pos_ + n > end_) throw LoadError("model file is truncated");
    }
    const std::string& b_;
    std::size_t end_;
    std::size_t pos_ = 0;
};

std::string raw_sha256(const std::string& data) {
    const std::string hex = sha256_hex(data);
    std::string raw;
    for (std::size_t i = 0; i < hex.size(); i += 2) raw.push_back(static_cast<char>(std::stoi(hex.substr(i, 2), nullptr, 16)));
    return raw;
}

}  // namespace

void save_model(const DecoderModel& model, const std::string& path) {
    std::string b(kMagic, kMagic + 8);
    put<std::uint32_t>(b, kModelVersion);
    put<std::uint8_t>(b, model.kind == AfferentKind::SA1 ? 0 : 1);
    put<std::uint64_t>(b, model.training_seed);
    put<double>(b, model.norm.mean);
    put<double>(b, model.norm.scale);
    const std::string cfg = nlohmann::json(model.config).dump();
    put<std::uint32_t>(b, static_cast<std::uint32_t>(cfg.size()));
    b += cfg;
    put<std::uint64_t>(b, model.params.size());
    for (double v : model.params) put<double>(b, v);
    b += raw_sha256(b);
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write " + path);
    out.write(b.data(), static_cast<std::streamsize>(b.size()));
    if (!out) throw std::runtime_error("failed writing " + path);
}

DecoderModel load_model(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw LoadError("cannot open model file: " + path);
    const std::string b((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    if (b.size() < 8 + 4 || std::memcmp(b.data(), kMagic, 8) != 0) throw LoadError("not a decoder model file: " + path);
    Reader head(b, b.size());
    head.bytes(8);
    const auto version = head.get<std::uint32_t>();
    if (version != kModelVersion)
        throw LoadError("model format version " + std::to_string(version) + " is not supported");
    if (b.size() < 32 + head.pos()) throw LoadError("model file is truncated");
    const std::size_t body = b.size() - 32;
    Reader r(b, body);
    r.bytes(12);
    DecoderModel m;
    const auto kind = r.get<std::uint8_t>();
    if (kind > 1) throw LoadError("model file has an unknown afferent kind");
    m.kind = kind == 0 ? AfferentKind::SA1 : AfferentKind::RA1;
    m.training_seed = r.get<std::uint64_t>();
    m.norm.mean = r.get<double>();
    m.norm.scale = r.get<double>();
    const auto cfg_len = r.get<std::uint32_t>();
    const std::string cfg = r.bytes(cfg_len);
    const auto n = r.get<std::uint64_t>();
    if (n > (body - r.pos()) / 8) throw LoadError("model file is truncated");
    m.params.resize(n);
    for (auto& v : m.params) v = r.get<double>();
    if (r.pos() != body) throw LoadError("model file has trailing bytes");
    if (b.substr(body) != raw_sha256(b.substr(0, body))) throw LoadError("model file checksum mismatch");
    try {
        m.config = nlohmann::json::parse(cfg).get<DecoderConfig>();
    } catch (const std::exception& e) {
        throw LoadError(std::string("model file has an invalid config: ") + e.what());
    }
    if (parameter_count(m.config) != n) throw LoadError("model parameter count does not match its config");
    return m;
}

void write_train_report_csv(const std::string& path, const TrainReport& report) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write " + path);
    out.precision(10);
    out << "epoch,train_loss,val_loss\n";
    for (std::size_t e = 0; e < report.train_loss.size(); ++e)
        out << e << ',' << report.train_loss[e] << ',' << report.val_loss[e] << '\n';
}

}  // namespace tactile
