// config.hpp - JSON experiment config with line-accurate validation errors
#pragma once

#include <cstdint>
#include <fstream>
#include <memory>
#include <sstream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include <rapidjson/error/en.h>
#include <rapidjson/reader.h>

#include "experiment.hpp"

namespace afdm_rpe {

class ConfigError : public std::runtime_error {
public:
    ConfigError(int line, const std::string& msg)
        : std::runtime_error((line > 0 ? "config line " + std::to_string(line) : std::string("config")) + ": " + msg),
          line_(line) {}
    int line() const { return line_; }

private:
    int line_;
};

struct JsonNode {
    enum class Kind { Null, Bool, Int, Double, String, Array, Object };
    Kind kind = Kind::Null;
    bool b = false;
    std::int64_t i = 0;
    bool big_unsigned = false;  // integer above INT64_MAX, kept in u
    std::uint64_t u = 0;
    double d = 0.0;
    std::string s;
    std::vector<JsonNode> items;
    std::vector<std::pair<std::string, JsonNode>> members;
    std::vector<int> member_lines;  // line of each key
    int line = 1;

    bool is_number() const { return kind == Kind::Int || kind == Kind::Double; }
    double number() const { return kind == Kind::Int ? (big_unsigned ? static_cast<double>(u) : static_cast<double>(i)) : d; }
};

namespace detail {

struct LineCountingStream {
    using Ch = char;
    explicit LineCountingStream(const char* src) : s(src) {}
    Ch Peek() const { return s.Peek(); }
    Ch Take() {
        const Ch c = s.Take();
        if (c == '\n') ++line;
        return c;
    }
    size_t Tell() const { return s.Tell(); }
    Ch* PutBegin() { return nullptr; }
    void Put(Ch) {}
    void Flush() {}
    size_t PutEnd(Ch*) { return 0; }

    rapidjson::StringStream s;
    int line = 1;
};

struct TreeBuilder : rapidjson::BaseReaderHandler<rapidjson::UTF8<>, TreeBuilder> {
    explicit TreeBuilder(const LineCountingStream& st) : stream(st) {}

    JsonNode root;
    std::vector<JsonNode*> stack;
    std::string pending_key;
    int pending_line = 1;
    bool have_root = false;
    const LineCountingStream& stream;

    JsonNode* place(JsonNode n) {
        n.line = stream.line;
        if (stack.empty()) {
            root = std::move(n);
            have_root = true;
            return &root;
        }
        JsonNode* top = stack.back();
        if (top->kind == JsonNode::Kind::Array) {
            top->items.push_back(std::move(n));
            return &top->items.back();
        }
        top->members.emplace_back(pending_key, std::move(n));
        top->member_lines.push_back(pending_line);
        return &top->members.back().second;
    }
    bool scalar(JsonNode n) {
        place(std::move(n));
        return true;
    }
    bool Null() { return scalar({}); }
    bool Bool(bool v) {
        JsonNode n;
        n.kind = JsonNode::Kind::Bool;
        n.b = v;
        return scalar(std::move(n));
    }
    bool Int64(std::int64_t v) {
        JsonNode n;
        n.kind = JsonNode::Kind::Int;
        n.i = v;
        return scalar(std::move(n));
    }
    bool Int(int v) { return Int64(v); }
    bool Uint(unsigned v) { return Int64(v); }
    bool Uint64(std::uint64_t v) {
        if (v <= static_cast<std::uint64_t>(INT64_MAX)) return Int64(static_cast<std::int64_t>(v));
        JsonNode n;
        n.kind = JsonNode::Kind::Int;
        n.big_unsigned = true;
        n.u = v;
        return scalar(std::move(n));
    }
    bool Double(double v) {
        JsonNode n;
        n.kind = JsonNode::Kind::Double;
        n.d = v;
        return scalar(std::move(n));
    }
    bool String(const char* str, rapidjson::SizeType len, bool) {
        JsonNode n;
        n.kind = JsonNode::Kind::String;
        n.s.assign(str, len);
        return scalar(std::move(n));
    }
    bool StartObject() {
        JsonNode n;
        n.kind = JsonNode::Kind::Object;
        stack.push_back(place(std::move(n)));
        return true;
    }
    bool Key(const char* str, rapidjson::SizeType len, bool) {
        pending_key.assign(str, len);
        pending_line = stream.line;
        return true;
    }
    bool EndObject(rapidjson::SizeType) {
        stack.pop_back();
        return true;
    }
    bool StartArray() {
        JsonNode n;
        n.kind = JsonNode::Kind::Array;
        stack.push_back(place(std::move(n)));
        return true;
    }
    bool EndArray(rapidjson::SizeType) {
        stack.pop_back();
        return true;
    }
};

inline int line_of_offset(const std::string& text, size_t off) {
    int line = 1;
    for (size_t i = 0; i < off && i < text.size(); ++i)
        if (text[i] == '\n') ++line;
    return line;
}

}  // namespace detail

inline JsonNode parse_json_with_lines(const std::string& text) {
    detail::LineCountingStream st(text.c_str());
    detail::TreeBuilder tb(st);
    rapidjson::Reader reader;
    const auto ok = reader.Parse<rapidjson::kParseCommentsFlag | rapidjson::kParseFullPrecisionFlag |
                                 rapidjson::kParseStopWhenDoneFlag>(st, tb);
    if (ok.IsError())
        throw ConfigError(detail::line_of_offset(text, ok.Offset()),
                          std::string("JSON syntax error: ") + rapidjson::GetParseError_En(ok.Code()));
    // trailing garbage after the document
    detail::LineCountingStream rest = st;
    while (rest.Peek() == ' ' || rest.Peek() == '\n' || rest.Peek() == '\r' || rest.Peek() == '\t') rest.Take();
    if (rest.Peek() != '\0') throw ConfigError(rest.line, "unexpected content after the JSON document");
    return std::move(tb.root);
}

namespace detail {

// Walks one object, tracking which keys were consumed.
class ObjectReader {
public:
    ObjectReader(const JsonNode& node, std::string where) : node_(node), where_(std::move(where)) {
        if (node.kind != JsonNode::Kind::Object) throw ConfigError(node.line, quoted() + " must be an object");
        used_.assign(node.members.size(), false);
        for (size_t i = 0; i < node.members.size(); ++i)
            for (size_t j = 0; j < i; ++j)
                if (node.members[i].first == node.members[j].first)
                    throw ConfigError(node.member_lines[i], "duplicate key \"" + node.members[i].first + "\"" + in());
    }

    const JsonNode* find(const std::string& key) {
        for (size_t i = 0; i < node_.members.size(); ++i)
            if (node_.members[i].first == key) {
                used_[i] = true;
                return &node_.members[i].second;
            }
        return nullptr;
    }

    void finish() const {
        for (size_t i = 0; i < node_.members.size(); ++i)
            if (!used_[i]) throw ConfigError(node_.member_lines[i], "unknown key \"" + node_.members[i].first + "\"" + in());
    }

    double real(const std::string& key, double def) {
        const JsonNode* n = find(key);
        if (!n) return def;
        if (!n->is_number()) throw ConfigError(n->line, name(key) + " must be a number");
        return n->number();
    }
    double positive(const std::string& key, double def) {
        const double v = real(key, def);
        if (!(v > 0.0)) throw ConfigError(line_of(key), name(key) + " must be > 0");
        return v;
    }
    std::int64_t integer(const std::string& key, std::int64_t def, std::int64_t lo) {
        const JsonNode* n = find(key);
        if (!n) return def;
        if (n->kind != JsonNode::Kind::Int || n->big_unsigned) throw ConfigError(n->line, name(key) + " must be an integer");
        if (n->i < lo) throw ConfigError(n->line, name(key) + " must be >= " + std::to_string(lo));
        return n->i;
    }
    std::uint64_t unsigned64(const std::string& key, std::uint64_t def) {
        const JsonNode* n = find(key);
        if (!n) return def;
        if (n->kind != JsonNode::Kind::Int || (!n->big_unsigned && n->i < 0))
            throw ConfigError(n->line, name(key) + " must be a nonnegative integer");
        return n->big_unsigned ? n->u : static_cast<std::uint64_t>(n->i);
    }
    bool boolean(const std::string& key, bool def) {
        const JsonNode* n = find(key);
        if (!n) return def;
        if (n->kind != JsonNode::Kind::Bool) throw ConfigError(n->line, name(key) + " must be true or false");
        return n->b;
    }
    std::string text(const std::string& key, const std::string& def) {
        const JsonNode* n = find(key);
        if (!n) return def;
        if (n->kind != JsonNode::Kind::String) throw ConfigError(n->line, name(key) + " must be a string");
        return n->s;
    }
    template <class E>
    E choice(const std::string& key, E def, const std::vector<std::pair<std::string, E>>& options) {
        const JsonNode* n = find(key);
        if (!n) return def;
        std::string all;
        for (const auto& [k, v] : options) {
            if (n->kind == JsonNode::Kind::String && n->s == k) return v;
            all += (all.empty() ? "\"" : ", \"") + k + "\"";
        }
        throw ConfigError(n->line, name(key) + " must be one of " + all);
    }

    std::string name(const std::string& key) const { return "\"" + (where_.empty() ? key : where_ + "." + key) + "\""; }
    int line_of(const std::string& key) const {
        for (size_t i = 0; i < node_.members.size(); ++i)
            if (node_.members[i].first == key) return node_.members[i].second.line;
        return node_.line;
    }

private:
    std::string quoted() const { return where_.empty() ? "config root" : "\"" + where_ + "\""; }
    std::string in() const { return where_.empty() ? "" : " in \"" + where_ + "\""; }

    const JsonNode& node_;
    std::string where_;
    std::vector<bool> used_;
};

}  // namespace detail

inline ExperimentConfig parse_experiment_config(const std::string& text) {
    const JsonNode root = parse_json_with_lines(text);
    ExperimentConfig cfg;
    detail::ObjectReader top(root, "");

    if (const JsonNode* g = top.find("grid")) {
        detail::ObjectReader r(*g, "grid");
        cfg.grid.k_tau = static_cast<int>(r.integer("k_tau", cfg.grid.k_tau, 1));
        cfg.grid.d_nu = static_cast<int>(r.integer("d_nu", cfg.grid.d_nu, 1));
        cfg.grid.f_max = r.positive("f_max", cfg.grid.f_max);
        r.finish();
    }

    bool c1_given = false, c2_given = false;
    if (const JsonNode* a = top.find("afdm")) {
        detail::ObjectReader r(*a, "afdm");
        cfg.afdm.n_samples = static_cast<int>(r.integer("n_samples", cfg.afdm.n_samples, 2));
        c1_given = r.find("c1") != nullptr;
        c2_given = r.find("c2") != nullptr;
        cfg.afdm.c1 = r.real("c1", cfg.afdm.c1);
        cfg.afdm.c2 = r.real("c2", cfg.afdm.c2);
        cfg.afdm.sample_rate_hz = r.positive("sample_rate_hz", cfg.afdm.sample_rate_hz);
        cfg.afdm.carrier_hz = r.positive("carrier_hz", cfg.afdm.carrier_hz);
        const auto q = r.integer("constellation_order", cfg.afdm.constellation_order, 4);
        if (qam_side(static_cast<int>(q)) < 0)
            throw ConfigError(r.line_of("constellation_order"), "\"afdm.constellation_order\" must be a power of 4");
        cfg.afdm.constellation_order = static_cast<int>(q);
        r.finish();
    }
    if (!c1_given) cfg.afdm.c1 = default_c1(cfg.afdm.n_samples, cfg.grid.f_max);
    if (!c2_given) cfg.afdm.c2 = default_c2(cfg.afdm.n_samples);

    if (const JsonNode* s = top.find("scene")) {
        detail::ObjectReader r(*s, "scene");
        cfg.scene.los_distance_m = r.real("los_distance_m", cfg.scene.los_distance_m);
        if (!(cfg.scene.los_distance_m >= 0.0))
            throw ConfigError(r.line_of("los_distance_m"), "\"scene.los_distance_m\" must be >= 0");
        cfg.scene.gain_power = r.positive("gain_power", cfg.scene.gain_power);
        cfg.gain_model = r.choice<GainModel>(
            "gain_model", cfg.gain_model,
            {{"complex_gaussian", GainModel::ComplexGaussian}, {"unit_magnitude", GainModel::UnitMagnitude}});
        if (const JsonNode* t = r.find("targets")) {
            if (t->kind != JsonNode::Kind::Array) throw ConfigError(t->line, "\"scene.targets\" must be an array");
            cfg.scene.targets.clear();
            for (size_t k = 0; k < t->items.size(); ++k) {
                detail::ObjectReader tr(t->items[k], "scene.targets[" + std::to_string(k) + "]");
                Target tg;
                tg.range_m = tr.real("range_m", 0.0);
                if (!(tg.range_m >= 0.0)) throw ConfigError(tr.line_of("range_m"), tr.name("range_m") + " must be >= 0");
                tg.velocity_mps = tr.real("velocity_mps", 0.0);
                tr.finish();
                cfg.scene.targets.push_back(tg);
            }
        }
        r.finish();
    }

    if (const JsonNode* h = top.find("hyper")) {
        detail::ObjectReader r(*h, "hyper");
        Hyperparams& hp = cfg.hyper;
        hp.beta = r.positive("beta", hp.beta);
        hp.eta = r.positive("eta", hp.eta);
        hp.alpha = r.positive("alpha", hp.alpha);
        hp.max_iters = static_cast<int>(r.integer("max_iters", hp.max_iters, 0));
        hp.inner_tol = r.positive("inner_tol", hp.inner_tol);
        hp.support_threshold = r.real("support_threshold", hp.support_threshold);
        if (!(hp.support_threshold > 0.0 && hp.support_threshold < 1.0))
            throw ConfigError(r.line_of("support_threshold"), "\"hyper.support_threshold\" must lie in (0,1)");
        hp.lasso_max_iters = static_cast<int>(r.integer("lasso_max_iters", hp.lasso_max_iters, 1));
        hp.fp_max_iters = static_cast<int>(r.integer("fp_max_iters", hp.fp_max_iters, 1));
        hp.lasso_solver = r.choice<LassoSolver>(
            "lasso_solver", hp.lasso_solver,
            {{"interior_point", LassoSolver::InteriorPoint}, {"fista", LassoSolver::Fista}});
        hp.psd_solver = r.choice<PsdSolver>(
            "psd_solver", hp.psd_solver,
            {{"admm", PsdSolver::Admm}, {"projected_gradient", PsdSolver::ProjectedGradient}});
        hp.scale_target = r.real("scale_target", hp.scale_target);
        if (!(hp.scale_target >= 0.0))
            throw ConfigError(r.line_of("scale_target"), "\"hyper.scale_target\" must be >= 0");
        hp.support_rule = r.choice<SupportRule>(
            "support_rule", hp.support_rule,
            {{"anchored", SupportRule::Anchored}, {"per_point", SupportRule::PerPoint}});
        hp.min_delay_separation = static_cast<int>(r.integer("min_delay_separation", hp.min_delay_separation, 0));
        hp.top_k = static_cast<int>(r.integer("top_k", hp.top_k, 0));
        r.finish();
    }

    if (const JsonNode* s = top.find("snr_db_list")) {
        if (s->kind != JsonNode::Kind::Array || s->items.empty())
            throw ConfigError(s->line, "\"snr_db_list\" must be a nonempty array of numbers");
        cfg.snr_db_list.clear();
        for (const auto& it : s->items) {
            if (!it.is_number()) throw ConfigError(it.line, "\"snr_db_list\" entries must be numbers");
            cfg.snr_db_list.push_back(it.number());
        }
    }
    if (const JsonNode* f = top.find("frame_counts")) {
        if (f->kind != JsonNode::Kind::Array || f->items.empty())
            throw ConfigError(f->line, "\"frame_counts\" must be a nonempty array");
        cfg.frame_counts.clear();
        for (const auto& it : f->items) {
            if (it.kind == JsonNode::Kind::String && it.s == "perfect") {
                cfg.frame_counts.push_back(kPerfectFrames);
            } else if (it.kind == JsonNode::Kind::Int && !it.big_unsigned && it.i >= 1 && it.i <= INT32_MAX) {
                cfg.frame_counts.push_back(static_cast<int>(it.i));
            } else {
                throw ConfigError(it.line, "\"frame_counts\" entries must be integers >= 1 or \"perfect\"");
            }
        }
    }
    cfg.trials = static_cast<int>(top.integer("trials", cfg.trials, 1));
    cfg.seed = top.unsigned64("seed", cfg.seed);
    cfg.output_path = top.text("output_path", cfg.output_path);
    cfg.plot_dir = top.text("plot_dir", cfg.plot_dir);
    cfg.dict_cache = top.text("dict_cache", cfg.dict_cache);
    cfg.strict = top.boolean("strict", cfg.strict);
    cfg.noise_power_error = top.real("noise_power_error", cfg.noise_power_error);
    if (!(cfg.noise_power_error > -1.0))
        throw ConfigError(top.line_of("noise_power_error"), "\"noise_power_error\" must be > -1");
    top.finish();
    return cfg;
}

inline ExperimentConfig load_experiment_config(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw ConfigError(0, "cannot open " + path);
    std::stringstream ss;
    ss << is.rdbuf();
    return parse_experiment_config(ss.str());
}

}  // namespace afdm_rpe
