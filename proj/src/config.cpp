#include "lpma/config.hpp"

#include <charconv>
#include <fstream>
#include <sstream>

#include <yaml-cpp/yaml.h>

#include "lpma/error.hpp"

namespace lpma {

PeriodWindow WindowConfig::resolve(const PanelDataset& panel) const {
    const Period lo = first.value_or(panel.first_period());
    const Period hi = last.value_or(panel.period(panel.n_periods() - 1));
    if (hi < lo) throw Error("config", "EmptyWindow", "window '" + name + "' ends before it starts");
    return {lo, hi};
}

const char* to_string(RegimeEvaluation r) noexcept {
    return r == RegimeEvaluation::SampleQuartiles ? "sample_quartiles" : "reference_values";
}

RegimeEvaluation parse_regime_evaluation(const std::string& text) {
    if (text == "sample_quartiles") return RegimeEvaluation::SampleQuartiles;
    if (text == "reference_values") return RegimeEvaluation::ReferenceValues;
    throw Error("config", "InvalidValue", "regime_evaluation '" + text + "' (expected sample_quartiles | reference_values)");
}

void RunConfig::validate() const {
    auto bad = [](const std::string& m) { throw Error("config", "InvalidValue", m); };
    if (panel.empty()) throw Error("config", "MissingKey", "data.panel is required");
    if (!seed) throw Error("config", "MissingSeed", "a seed is required (config key `seed` or --seed)");
    if (outcomes.empty()) bad("outcomes is empty");
    if (policies.empty()) bad("policies is empty");
    if (models.empty()) bad("models is empty");
    if (horizons.empty() || *horizons.begin() < 1) bad("horizons must be a nonempty set of positive integers");
    if (windows.empty()) bad("windows is empty");
    std::set<std::string> names;
    for (const auto& w : windows) {
        if (w.name.empty() || w.name.find_first_of("/\\") != std::string::npos)
            bad("window names must be nonempty and free of path separators");
        if (!names.insert(w.name).second) bad("duplicate window '" + w.name + "'");
    }
    for (ModelForm f : models)
        if (f == ModelForm::Baseline) bad("Baseline is the test reference, not a candidate model");
    if (!(alpha > 0.0 && alpha < 1.0)) bad("alpha must lie in (0, 1)");
    if (!(hp_lambda > 0.0)) bad("hp_lambda must be positive");
    if (bandwidth && *bandwidth < 0) bad("bandwidth must be nonnegative");
    if (anticipation && forecasts.empty()) throw Error("config", "MissingKey", "data.forecasts is required with anticipation");
    if (factors && factor_r_max < 0 && fixed_factors < 0) bad("factors need r_max >= 0 or a fixed count");
    if (bootstrap && bootstrap_draws < 2) bad("bootstrap draws must be at least 2");
    if (control_lags < 1 || policy_lags < 0) bad("control_lags >= 1 and policy_lags >= 0 required");
    if (threads < 1) bad("threads must be at least 1");
}

namespace {

std::vector<std::string> strings(const YAML::Node& n, const std::string& key) {
    if (!n.IsSequence()) throw Error("config", "InvalidValue", key + " must be a list");
    return n.as<std::vector<std::string>>();
}

Period period_of(const YAML::Node& n, const std::string& key) {
    const auto p = parse_period(n.as<std::string>());
    if (!p) throw Error("config", "InvalidValue", key + " '" + n.as<std::string>() + "' is not YYYY-Qn");
    return *p;
}

std::set<int> horizon_set(const YAML::Node& n) {
    std::set<int> out;
    if (n.IsScalar()) {
        const int H = n.as<int>();
        for (int h = 1; h <= H; ++h) out.insert(h);
        return out;
    }
    for (const auto& x : n) out.insert(x.as<int>());
    return out;
}

void check_keys(const YAML::Node& n, const std::set<std::string>& allowed, const std::string& where) {
    for (const auto& kv : n) {
        const auto k = kv.first.as<std::string>();
        if (!allowed.count(k)) throw Error("config", "UnknownKey", "'" + k + "' in " + where);
    }
}

std::filesystem::path resolve_path(const std::string& p, const std::filesystem::path& base) {
    std::filesystem::path path(p);
    return path.is_absolute() || base.empty() ? path : base / path;
}

std::string read_file(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw Error("config", "FileNotFound", path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

YAML::Node parse_yaml(const std::string& text) {
    try {
        return YAML::Load(text);
    } catch (const YAML::Exception& e) {
        throw Error("config", "ParseError", e.what());
    }
}

nlohmann::json scalar_json(const std::string& s) {
    if (s == "true" || s == "True") return true;
    if (s == "false" || s == "False") return false;
    if (s == "null" || s == "~") return nullptr;
    std::int64_t i = 0;
    auto [pi, ei] = std::from_chars(s.data(), s.data() + s.size(), i);
    if (ei == std::errc() && pi == s.data() + s.size()) return i;
    std::uint64_t u = 0;
    auto [pu, eu] = std::from_chars(s.data(), s.data() + s.size(), u);
    if (eu == std::errc() && pu == s.data() + s.size()) return u;
    double d = 0.0;
    auto [pd, ed] = std::from_chars(s.data(), s.data() + s.size(), d);
    if (ed == std::errc() && pd == s.data() + s.size()) return d;
    return s;
}

nlohmann::json node_json(const YAML::Node& n) {
    switch (n.Type()) {
        case YAML::NodeType::Scalar: return n.Tag() == "!" ? nlohmann::json(n.Scalar()) : scalar_json(n.Scalar());
        case YAML::NodeType::Sequence: {
            auto a = nlohmann::json::array();
            for (const auto& x : n) a.push_back(node_json(x));
            return a;
        }
        case YAML::NodeType::Map: {
            auto o = nlohmann::json::object();
            for (const auto& kv : n) o[kv.first.as<std::string>()] = node_json(kv.second);
            return o;
        }
        default: return nullptr;
    }
}

}  // namespace

nlohmann::json yaml_to_json(const std::string& text) { return node_json(parse_yaml(text)); }

RunConfig parse_run_config(const std::string& text, const std::filesystem::path& base_dir) {
    const YAML::Node root = parse_yaml(text);
    RunConfig c;
    if (!root.IsMap()) throw Error("config", "ParseError", "top level must be a mapping");
    try {
        check_keys(root, {"data", "rate", "transforms", "outcomes", "policies", "controls", "control_lags", "policy_lags",
                          "models", "horizons", "windows", "alpha", "hp_lambda", "bandwidth", "regime_evaluation",
                          "anticipation", "output_gap", "factors", "bootstrap", "cv1", "seed", "threads"},
                   "run config");
        if (auto d = root["data"]) {
            check_keys(d, {"panel", "forecasts"}, "data");
            if (d["panel"]) c.panel = resolve_path(d["panel"].as<std::string>(), base_dir);
            if (d["forecasts"]) c.forecasts = resolve_path(d["forecasts"].as<std::string>(), base_dir);
        }
        if (root["rate"]) c.rate = root["rate"].as<std::string>();
        if (auto t = root["transforms"]) {
            c.transforms.clear();
            for (const auto& kv : t) c.transforms[kv.first.as<std::string>()] = parse_transform(kv.second.as<std::string>());
        }
        if (root["outcomes"]) c.outcomes = strings(root["outcomes"], "outcomes");
        if (root["policies"]) c.policies = strings(root["policies"], "policies");
        if (root["controls"]) c.controls = strings(root["controls"], "controls");
        if (root["control_lags"]) c.control_lags = root["control_lags"].as<int>();
        if (root["policy_lags"]) c.policy_lags = root["policy_lags"].as<int>();
        if (root["models"]) {
            c.models.clear();
            for (const auto& m : strings(root["models"], "models")) c.models.push_back(parse_form(m));
        }
        if (root["horizons"]) c.horizons = horizon_set(root["horizons"]);
        if (auto ws = root["windows"]) {
            c.windows.clear();
            for (const auto& w : ws) {
                check_keys(w, {"name", "first", "last"}, "windows");
                WindowConfig wc;
                wc.name = w["name"].as<std::string>("");
                if (w["first"] && !w["first"].IsNull()) wc.first = period_of(w["first"], "window first");
                if (w["last"] && !w["last"].IsNull()) wc.last = period_of(w["last"], "window last");
                c.windows.push_back(std::move(wc));
            }
        }
        if (root["alpha"]) c.alpha = root["alpha"].as<double>();
        if (root["hp_lambda"]) c.hp_lambda = root["hp_lambda"].as<double>();
        if (auto b = root["bandwidth"]) {
            if (b.as<std::string>() == "horizon") c.bandwidth.reset();
            else c.bandwidth = b.as<int>();
        }
        if (root["regime_evaluation"]) c.regime_evaluation = parse_regime_evaluation(root["regime_evaluation"].as<std::string>());
        if (root["anticipation"]) c.anticipation = root["anticipation"].as<bool>();
        if (auto g = root["output_gap"]) {
            if (g.IsMap()) {
                check_keys(g, {"enabled", "series"}, "output_gap");
                c.output_gap = g["enabled"].as<bool>(true);
                if (g["series"]) c.output_gap_series = g["series"].as<std::string>();
            } else {
                c.output_gap = g.as<bool>();
            }
        }
        if (auto f = root["factors"]) {
            if (f.IsMap()) {
                check_keys(f, {"enabled", "r_max", "fixed"}, "factors");
                c.factors = f["enabled"].as<bool>(true);
                if (f["r_max"]) c.factor_r_max = f["r_max"].as<int>();
                if (f["fixed"]) c.fixed_factors = f["fixed"].as<int>();
            } else {
                c.factors = f.as<bool>();
            }
        }
        if (auto b = root["bootstrap"]) {
            if (b.IsMap()) {
                check_keys(b, {"enabled", "draws"}, "bootstrap");
                c.bootstrap = b["enabled"].as<bool>(true);
                if (b["draws"]) c.bootstrap_draws = b["draws"].as<int>();
            } else {
                c.bootstrap = b.as<bool>();
            }
        }
        if (root["cv1"]) c.cv1 = root["cv1"].as<bool>();
        if (root["seed"]) c.seed = root["seed"].as<std::uint64_t>();
        if (root["threads"]) c.threads = root["threads"].as<unsigned>();
    } catch (const YAML::Exception& e) {
        throw Error("config", "InvalidValue", e.what());
    }
    return c;
}

RunConfig load_run_config(const std::filesystem::path& path) {
    return parse_run_config(read_file(path), path.parent_path());
}

nlohmann::json to_json(const RunConfig& c) {
    nlohmann::json j;
    j["data"] = {{"panel", c.panel.generic_string()}, {"forecasts", c.forecasts.generic_string()}};
    j["rate"] = c.rate;
    nlohmann::json t = nlohmann::json::object();
    for (const auto& [k, v] : c.transforms) t[k] = to_string(v);
    j["transforms"] = t;
    j["outcomes"] = c.outcomes;
    j["policies"] = c.policies;
    j["controls"] = c.controls;
    j["control_lags"] = c.control_lags;
    j["policy_lags"] = c.policy_lags;
    auto models = nlohmann::json::array();
    for (ModelForm f : c.models) models.push_back(to_string(f));
    j["models"] = models;
    j["horizons"] = std::vector<int>(c.horizons.begin(), c.horizons.end());
    auto ws = nlohmann::json::array();
    for (const auto& w : c.windows)
        ws.push_back({{"name", w.name},
                      {"first", w.first ? nlohmann::json(w.first->str()) : nlohmann::json()},
                      {"last", w.last ? nlohmann::json(w.last->str()) : nlohmann::json()}});
    j["windows"] = ws;
    j["alpha"] = c.alpha;
    j["hp_lambda"] = c.hp_lambda;
    j["bandwidth"] = c.bandwidth ? nlohmann::json(*c.bandwidth) : nlohmann::json("horizon");
    j["regime_evaluation"] = to_string(c.regime_evaluation);
    j["anticipation"] = c.anticipation;
    j["output_gap"] = {{"enabled", c.output_gap}, {"series", c.output_gap_series}};
    j["factors"] = {{"enabled", c.factors}, {"r_max", c.factor_r_max}, {"fixed", c.fixed_factors}};
    j["bootstrap"] = {{"enabled", c.bootstrap}, {"draws", c.bootstrap_draws}};
    j["cv1"] = c.cv1;
    j["seed"] = c.seed ? nlohmann::json(*c.seed) : nlohmann::json();
    return j;
}

SimulateConfig parse_simulate_config(const std::string& text) {
    const nlohmann::json j = yaml_to_json(text);
    if (!j.is_object()) throw Error("config", "ParseError", "top level must be a mapping");
    static const std::set<std::string> allowed{"dgp",       "replications", "seed",      "horizons", "identity", "msfe",
                                               "factor_r_max", "irf_draws", "alpha",     "tests",    "bootstrap",
                                               "models",    "criterion",    "threads"};
    for (const auto& [k, v] : j.items())
        if (!allowed.count(k)) throw Error("config", "UnknownKey", "'" + k + "' in simulate config");
    if (!j.contains("seed") || j.at("seed").is_null())
        throw Error("config", "MissingSeed", "a seed is required (config key `seed` or --seed)");
    SimulateConfig s;
    try {
        if (j.contains("dgp")) s.dgp = dgp_from_json(j.at("dgp"));
        auto& o = s.mc;
        o.seed = j.at("seed").get<std::uint64_t>();
        s.dgp.seed = o.seed;
        if (j.contains("replications")) o.replications = j.at("replications").get<int>();
        if (j.contains("horizons")) {
            const auto& h = j.at("horizons");
            o.horizons.clear();
            if (h.is_number_integer()) {
                for (int k = 1; k <= h.get<int>(); ++k) o.horizons.insert(k);
            } else {
                for (const auto& x : h) o.horizons.insert(x.get<int>());
            }
        }
        if (j.contains("identity")) o.identity = j.at("identity").get<bool>();
        if (j.contains("msfe")) o.msfe = j.at("msfe").get<bool>();
        if (j.contains("factor_r_max")) o.factor_r_max = j.at("factor_r_max").get<int>();
        if (j.contains("irf_draws")) o.irf_draws = j.at("irf_draws").get<int>();
        if (j.contains("alpha")) o.alpha = j.at("alpha").get<double>();
        if (j.contains("tests")) o.analysis.tests = j.at("tests").get<bool>();
        if (j.contains("bootstrap")) o.analysis.bootstrap = j.at("bootstrap").get<int>();
        if (j.contains("threads")) o.threads = j.at("threads").get<unsigned>();
        if (j.contains("criterion")) {
            const auto c = j.at("criterion").get<std::string>();
            if (c == "mallows") o.analysis.criterion = WeightCriterion::Mallows;
            else if (c == "cv1") o.analysis.criterion = WeightCriterion::Cv1;
            else throw Error("config", "InvalidValue", "criterion '" + c + "' (expected mallows | cv1)");
        }
        if (j.contains("models")) {
            o.analysis.forms.clear();
            for (const auto& m : j.at("models")) o.analysis.forms.push_back(parse_form(m.get<std::string>()));
        }
    } catch (const nlohmann::json::exception& e) {
        throw Error("config", "InvalidValue", e.what());
    }
    s.dgp.validate();
    return s;
}

SimulateConfig load_simulate_config(const std::filesystem::path& path) { return parse_simulate_config(read_file(path)); }

}  // namespace lpma
