#include "aatk/systems.hpp"

#include <json.hpp>

#include <algorithm>
#include <cctype>
#include <fstream>
#include <sstream>

namespace aatk::systems {

namespace {

std::string trim(const std::string& s) {
    auto b = s.find_first_not_of(" \t\r\n");
    auto e = s.find_last_not_of(" \t\r\n");
    return b == std::string::npos ? "" : s.substr(b, e - b + 1);
}

int var_slot(const std::string& name, int n) {
    if (name.size() < 2 || (name[0] != 'q' && name[0] != 'p'))
        throw InvalidInputError("unknown coordinate '" + name + "'");
    const int idx = std::stoi(name.substr(1));
    require(idx >= 1 && idx <= n, "coordinate '" + name + "' out of range");
    return (name[0] == 'q') ? idx - 1 : n + idx - 1;
}

void add_integral(SystemDefinition& def, const std::string& item, int line_no) {
    const auto eq = item.find('=');
    if (eq == std::string::npos)
        throw InvalidInputError("line " + std::to_string(line_no) +
                                ": integral needs the form 'label = expression'");
    const std::string label = trim(item.substr(0, eq));
    const std::string body = trim(item.substr(eq + 1));
    require(!label.empty(), "line " + std::to_string(line_no) + ": empty label");
    try {
        def.integral_exprs.push_back(expr::Expression::parse(body, def.n));
    } catch (const InvalidInputError& e) {
        throw InvalidInputError("line " + std::to_string(line_no) + ": " + e.what());
    }
    def.labels.push_back(label);
}

void add_region(SystemDefinition& def, const std::string& item, int line_no) {
    // "<var> in [lo, hi]"
    std::istringstream in(item);
    std::string var, kw, range;
    in >> var >> kw;
    std::getline(in, range);
    range = trim(range);
    if (kw != "in" || range.size() < 5 || range.front() != '[' || range.back() != ']')
        throw InvalidInputError("line " + std::to_string(line_no) +
                                ": region needs the form 'q1 in [lo, hi]'");
    const auto comma = range.find(',');
    require(comma != std::string::npos,
            "line " + std::to_string(line_no) + ": region bounds need a comma");
    const double lo = std::stod(range.substr(1, comma - 1));
    const double hi = std::stod(range.substr(comma + 1, range.size() - comma - 2));
    require(lo < hi, "line " + std::to_string(line_no) + ": empty region interval");
    if (!def.region) {
        Box b;
        b.lo = Vec::Constant(def.dim(), -std::numeric_limits<double>::infinity());
        b.hi = Vec::Constant(def.dim(), std::numeric_limits<double>::infinity());
        def.region = b;
    }
    const int slot = var_slot(var, def.n);
    def.region->lo[slot] = lo;
    def.region->hi[slot] = hi;
}

void add_meta(SystemDefinition& def, const std::string& item, int line_no) {
    const auto eq = item.find('=');
    require(eq != std::string::npos,
            "line " + std::to_string(line_no) + ": meta needs 'key = number'");
    const std::string key = trim(item.substr(0, eq));
    const double val = std::stod(trim(item.substr(eq + 1)));
    if (key == "expected_m")
        def.meta.expected_m = static_cast<int>(val);
    else
        def.meta.values[key] = val;
}

SystemDefinition parse_structured_text(const std::string& text) {
    SystemDefinition def;
    std::istringstream in(text);
    std::string line;
    int line_no = 0;
    std::vector<std::pair<std::string, std::pair<std::string, int>>> deferred;
    while (std::getline(in, line)) {
        ++line_no;
        const std::string t = trim(line);
        if (t.empty() || t[0] == '#') continue;
        const auto colon = t.find(':');
        if (colon == std::string::npos)
            throw InvalidInputError("line " + std::to_string(line_no) +
                                    ": expected 'key: value'");
        const std::string key = trim(t.substr(0, colon));
        const std::string rest = trim(t.substr(colon + 1));
        if (key == "name") {
            def.name = rest;
        } else if (key == "n") {
            def.n = std::stoi(rest);
            require(def.n >= 1, "line " + std::to_string(line_no) + ": n must be >= 1");
        } else if (key == "integral" || key == "region" || key == "meta") {
            deferred.push_back({key, {rest, line_no}});
        } else {
            throw InvalidInputError("line " + std::to_string(line_no) +
                                    ": unknown key '" + key + "'");
        }
    }
    require(def.n >= 1, "system definition: missing 'n'");
    require(!def.name.empty(), "system definition: missing 'name'");
    for (const auto& [key, payload] : deferred) {
        if (key == "integral") add_integral(def, payload.first, payload.second);
        else if (key == "region") add_region(def, payload.first, payload.second);
        else add_meta(def, payload.first, payload.second);
    }
    require(def.k() >= 1, "system definition: no integrals given");
    require(def.k() <= def.n, "system definition: k must not exceed n");
    return def;
}

SystemDefinition parse_json(const std::string& text) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(text);
    } catch (const nlohmann::json::parse_error& e) {
        throw InvalidInputError(std::string("JSON system definition: ") + e.what());
    }
    SystemDefinition def;
    require(j.contains("name") && j.contains("n") && j.contains("integrals"),
            "JSON system definition: needs 'name', 'n', 'integrals'");
    def.name = j["name"].get<std::string>();
    def.n = j["n"].get<int>();
    require(def.n >= 1, "JSON system definition: n must be >= 1");
    int line = 0;
    for (const auto& item : j["integrals"])
        add_integral(def, item.get<std::string>(), ++line);
    if (j.contains("region")) {
        for (auto it = j["region"].begin(); it != j["region"].end(); ++it) {
            const auto arr = it.value();
            require(arr.is_array() && arr.size() == 2,
                    "JSON system definition: region entries are [lo, hi]");
            std::ostringstream os;
            os << it.key() << " in [" << arr[0].get<double>() << ", "
               << arr[1].get<double>() << "]";
            add_region(def, os.str(), 0);
        }
    }
    if (j.contains("meta")) {
        for (auto it = j["meta"].begin(); it != j["meta"].end(); ++it) {
            std::ostringstream os;
            os << it.key() << " = " << it.value().get<double>();
            add_meta(def, os.str(), 0);
        }
    }
    require(def.k() >= 1 && def.k() <= def.n,
            "JSON system definition: need 1 <= k <= n integrals");
    return def;
}

SystemDefinition from_text_lines(const std::string& name, int n,
                                 std::initializer_list<const char*> integrals) {
    SystemDefinition def;
    def.name = name;
    def.n = n;
    int line = 0;
    for (const char* item : integrals) add_integral(def, item, ++line);
    return def;
}

}  // namespace

std::string SystemDefinition::canonical_text() const {
    std::ostringstream os;
    os << "name=" << name << ";n=" << n << ";";
    for (int i = 0; i < k(); ++i)
        os << labels[i] << "=" << integral_exprs[i].text() << ";";
    return os.str();
}

std::vector<std::string> builtin_names() {
    return {"oscillator1d", "free1d",           "osc_free",
            "pendulum",     "kepler_planar",    "partial_momentum",
            "driven_osc_extended"};
}

SystemDefinition builtin(const std::string& name) {
    if (name == "oscillator1d") {
        auto def = from_text_lines(name, 1, {"H = (p1^2 + q1^2)/2"});
        def.meta.expected_m = 1;
        def.meta.values["period"] = TWO_PI;
        return def;
    }
    if (name == "free1d") {
        auto def = from_text_lines(name, 1, {"H = p1^2/2"});
        def.meta.expected_m = 0;
        return def;
    }
    if (name == "osc_free") {
        auto def =
            from_text_lines(name, 2, {"F1 = (p1^2 + q1^2)/2", "F2 = p2^2/2"});
        def.meta.expected_m = 1;
        def.meta.values["period1"] = TWO_PI;
        return def;
    }
    if (name == "pendulum") {
        auto def = from_text_lines(name, 1, {"H = p1^2/2 - cos(q1)"});
        def.meta.expected_m = 1;  // per libration/rotation region
        return def;
    }
    if (name == "kepler_planar") {
        auto def = from_text_lines(
            name, 2,
            {"H = (p1^2 + p2^2)/2 - 1/sqrt(q1^2 + q2^2)", "L = q1*p2 - q2*p1"});
        def.meta.expected_m = 2;  // bound region E < 0
        def.meta.values["min_radius"] = 0.1;
        Box b;
        b.lo = Vec::Constant(4, -8.0);
        b.hi = Vec::Constant(4, 8.0);
        def.region = b;
        return def;
    }
    if (name == "partial_momentum") {
        auto def = from_text_lines(name, 2, {"F1 = p1"});
        def.meta.expected_m = 0;
        return def;
    }
    if (name == "driven_osc_extended") {
        // autonomous extension of H = p^2/2 + q^2 cos t; slot 1 is the time
        // axis (q1 = t, p1 = p_t) and slot 2 the driven oscillator
        auto def =
            from_text_lines(name, 2, {"F1 = p1 + p2^2/2 + q2^2*cos(q1)"});
        def.meta.expected_m = 0;
        return def;
    }
    throw InvalidInputError("unknown builtin system '" + name + "'");
}

SystemDefinition parse_system(const std::string& text) {
    for (char c : text) {
        if (std::isspace(static_cast<unsigned char>(c))) continue;
        if (c == '{') return parse_json(text);
        break;
    }
    return parse_structured_text(text);
}

SystemDefinition load_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw InvalidInputError("cannot open system file '" + path + "'");
    std::stringstream ss;
    ss << in.rdbuf();
    return parse_system(ss.str());
}

HamiltonianSystem make_system(const SystemDefinition& def) {
    IntegralSet set;
    for (int i = 0; i < def.k(); ++i) {
        ScalarField f;
        f.label = def.labels[i];
        const expr::Expression e = def.integral_exprs[i];
        f.value = [e](const Vec& z) { return e.eval(z); };
        f.gradient = [e](const Vec& z) { return e.gradient(z); };
        set.funcs.push_back(std::move(f));
    }
    return HamiltonianSystem(SymplecticModel(def.dim()), std::move(set), def.region);
}

std::shared_ptr<const HamiltonianSystem> make_shared_system(const SystemDefinition& def) {
    return std::make_shared<const HamiltonianSystem>(make_system(def));
}

}  // namespace aatk::systems
