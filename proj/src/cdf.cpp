#include "gridengine/cdf.hpp"

#include <charconv>
#include <cmath>
#include <cstdio>
#include <numbers>
#include <vector>

namespace gridengine {

namespace {

constexpr double kDegPerRad = 180.0 / std::numbers::pi;

std::string_view trim(std::string_view s)
{
    const auto first = s.find_first_not_of(" \t\r");
    if (first == std::string_view::npos) {
        return {};
    }
    const auto last = s.find_last_not_of(" \t\r");
    return s.substr(first, last - first + 1);
}

bool starts_with(std::string_view line, std::string_view prefix)
{
    return trim(line).substr(0, prefix.size()) == prefix;
}

/// Columns [first, last], 1-based inclusive; clipped to the line.
std::string_view columns(std::string_view line, std::size_t first, std::size_t last)
{
    if (line.size() < first) {
        return {};
    }
    return line.substr(first - 1, std::min(last, line.size()) - first + 1);
}

struct Token {
    std::string_view text;
    std::size_t first_col;  // 1-based
    std::size_t last_col;
};

std::vector<Token> tokenize(std::string_view line, std::size_t from_col)
{
    std::vector<Token> tokens;
    std::size_t i = from_col - 1;
    while (i < line.size()) {
        while (i < line.size() && (line[i] == ' ' || line[i] == '\t' || line[i] == '\r')) {
            ++i;
        }
        if (i >= line.size()) {
            break;
        }
        const auto start = i;
        while (i < line.size() && line[i] != ' ' && line[i] != '\t' && line[i] != '\r') {
            ++i;
        }
        tokens.push_back({line.substr(start, i - start), start + 1, i});
    }
    return tokens;
}

[[noreturn]] void parse_error(std::size_t line_no, std::size_t first, std::size_t last, const std::string& what)
{
    throw Error(ErrorKind::Parse, "line " + std::to_string(line_no) + ", columns " + std::to_string(first) + "-" +
                                      std::to_string(last) + ": " + what);
}

double to_double(std::string_view text, std::size_t line_no, std::size_t first, std::size_t last,
                 const char* field)
{
    auto t = trim(text);
    if (!t.empty() && t.front() == '+') {
        t.remove_prefix(1);
    }
    double value = 0.0;
    const auto* end = t.data() + t.size();
    auto [ptr, ec] = std::from_chars(t.data(), end, value);
    if (t.empty() || ec != std::errc() || ptr != end || !std::isfinite(value)) {
        parse_error(line_no, first, last, "cannot read " + std::string(field) + " from \"" + std::string(text) + "\"");
    }
    return value;
}

long to_int(std::string_view text, std::size_t line_no, std::size_t first, std::size_t last, const char* field)
{
    auto t = trim(text);
    long value = 0;
    const auto* end = t.data() + t.size();
    auto [ptr, ec] = std::from_chars(t.data(), end, value);
    if (t.empty() || ec != std::errc() || ptr != end) {
        parse_error(line_no, first, last, "cannot read " + std::string(field) + " from \"" + std::string(text) + "\"");
    }
    return value;
}

struct Lines {
    std::vector<std::string_view> lines;

    explicit Lines(std::string_view text)
    {
        std::size_t pos = 0;
        while (pos < text.size()) {
            auto nl = text.find('\n', pos);
            if (nl == std::string_view::npos) {
                nl = text.size();
            }
            auto line = text.substr(pos, nl - pos);
            if (!line.empty() && line.back() == '\r') {
                line.remove_suffix(1);
            }
            lines.push_back(line);
            pos = nl + 1;
        }
    }
};

/// Index of the "-999" line closing a section that starts after `header`.
std::size_t section_end(const Lines& in, std::size_t header, const char* name)
{
    for (std::size_t i = header + 1; i < in.lines.size(); ++i) {
        if (starts_with(in.lines[i], "-999")) {
            return i;
        }
    }
    throw Error(ErrorKind::Parse, "line " + std::to_string(header + 1) + ": unterminated section \"" + name +
                                      "\" (no -999 terminator)");
}

std::size_t find_header(const Lines& in, std::size_t from, std::string_view header)
{
    for (std::size_t i = from; i < in.lines.size(); ++i) {
        const auto t = trim(in.lines[i]);
        if (t.empty()) {
            continue;
        }
        if (t.substr(0, header.size()) == header) {
            return i;
        }
        throw Error(ErrorKind::Parse, "line " + std::to_string(i + 1) + ": expected section header \"" +
                                          std::string(header) + "\"");
    }
    throw Error(ErrorKind::Parse, "missing section header \"" + std::string(header) + "\"");
}

Bus parse_bus_card(std::string_view line, std::size_t line_no, double base)
{
    if (line.size() < 26) {
        parse_error(line_no, 1, line.size(), "bus card too short");
    }
    Bus bus;
    const long number = to_int(columns(line, 1, 4), line_no, 1, 4, "bus number");
    bus.id = std::to_string(number);
    bus.name = std::string(trim(columns(line, 6, 17)));
    bus.area = static_cast<int>(to_int(columns(line, 19, 20), line_no, 19, 20, "load flow area"));
    const auto zone = trim(columns(line, 21, 23));
    bus.aux["cdf.loss_zone"] = std::string(zone.empty() ? "0" : zone);
    const long type = to_int(columns(line, 25, 26), line_no, 25, 26, "bus type");
    switch (type) {
    case 0: bus.kind = BusKind::PQ; break;
    case 1:
        bus.kind = BusKind::PQ;
        bus.aux["cdf.type"] = "1";
        break;
    case 2: bus.kind = BusKind::PV; break;
    case 3: bus.kind = BusKind::Slack; break;
    case 4:
        bus.kind = BusKind::Isolated;
        bus.in_service = false;
        break;
    default: parse_error(line_no, 25, 26, "unknown bus type " + std::to_string(type));
    }

    const auto tok = tokenize(line, 27);
    if (tok.size() < 12) {
        parse_error(line_no, 27, line.size(), "bus card has " + std::to_string(tok.size()) +
                                                  " numeric fields after the type, expected at least 12");
    }
    auto num = [&](std::size_t k, const char* field) {
        return to_double(tok[k].text, line_no, tok[k].first_col, tok[k].last_col, field);
    };
    bus.v_mag = num(0, "final voltage");
    bus.v_ang = num(1, "final angle") / kDegPerRad;
    bus.load_p = num(2, "load MW") / base;
    bus.load_q = num(3, "load MVAR") / base;
    bus.gen_p = num(4, "generation MW") / base;
    bus.gen_q = num(5, "generation MVAR") / base;
    bus.base_kv = num(6, "base KV");
    num(7, "desired volts");
    bus.aux["cdf.desired_volts"] = std::string(tok[7].text);
    bus.q_max = num(8, "maximum MVAR") / base;
    bus.q_min = num(9, "minimum MVAR") / base;
    bus.shunt_g = num(10, "shunt conductance");
    bus.shunt_b = num(11, "shunt susceptance");
    if (tok.size() > 12) {
        to_int(tok[12].text, line_no, tok[12].first_col, tok[12].last_col, "remote controlled bus");
        bus.aux["cdf.remote_bus"] = std::string(tok[12].text);
    }
    if (bus.kind == BusKind::Isolated && bus.v_mag <= 0.0) {
        bus.v_mag = 1.0;
    }
    return bus;
}

Branch parse_branch_card(std::string_view line, std::size_t line_no, double base)
{
    if (line.size() < 19) {
        parse_error(line_no, 1, line.size(), "branch card too short");
    }
    Branch br;
    const long tap_bus = to_int(columns(line, 1, 4), line_no, 1, 4, "tap bus number");
    const long z_bus = to_int(columns(line, 6, 9), line_no, 6, 9, "Z bus number");
    br.from_bus = std::to_string(tap_bus);
    br.to_bus = std::to_string(z_bus);
    auto keep = [&](const char* key, std::size_t first, std::size_t last, const char* field) {
        const auto t = trim(columns(line, first, last));
        if (!t.empty()) {
            to_int(t, line_no, first, last, field);
        }
        br.aux[key] = std::string(t.empty() ? "0" : t);
    };
    keep("cdf.area", 11, 12, "load flow area");
    keep("cdf.loss_zone", 13, 15, "loss zone");
    keep("cdf.circuit", 17, 17, "circuit");
    const long type = to_int(columns(line, 19, 19), line_no, 19, 19, "branch type");
    if (type < 0 || type > 4) {
        parse_error(line_no, 19, 19, "unknown branch type " + std::to_string(type));
    }
    br.id = br.from_bus + "-" + br.to_bus + "-" + br.aux["cdf.circuit"];

    const auto tok = tokenize(line, 20);
    if (tok.size() < 10) {
        parse_error(line_no, 20, line.size(), "branch card has " + std::to_string(tok.size()) +
                                                  " numeric fields after the type, expected at least 10");
    }
    auto num = [&](std::size_t k, const char* field) {
        return to_double(tok[k].text, line_no, tok[k].first_col, tok[k].last_col, field);
    };
    br.r = num(0, "resistance");
    br.x = num(1, "reactance");
    br.b_total = num(2, "line charging");
    br.rating = num(3, "MVA rating 1") / base;
    static constexpr const char* kPassthrough[] = {"cdf.rating2", "cdf.rating3", "cdf.control_bus", "cdf.side"};
    for (std::size_t k = 0; k < 4; ++k) {
        num(4 + k, kPassthrough[k]);
        br.aux[kPassthrough[k]] = std::string(tok[4 + k].text);
    }
    const double ratio = num(8, "transformer turns ratio");
    const double angle = num(9, "phase shift angle");
    static constexpr const char* kTail[] = {"cdf.tap_min", "cdf.tap_max", "cdf.step", "cdf.limit_min",
                                            "cdf.limit_max"};
    for (std::size_t k = 0; k < 5; ++k) {
        if (10 + k < tok.size()) {
            num(10 + k, kTail[k]);
            br.aux[kTail[k]] = std::string(tok[10 + k].text);
        } else {
            br.aux[kTail[k]] = "0";
        }
    }

    if (type == 0 && (ratio == 0.0 || ratio == 1.0) && angle == 0.0) {
        br.kind = BranchKind::Line;
        if (ratio == 1.0) {
            br.aux["cdf.ratio"] = std::string(tok[8].text);
        }
    } else {
        br.kind = BranchKind::Transformer;
        br.tap = ratio == 0.0 ? 1.0 : ratio;
        br.phase_shift = angle / kDegPerRad;
        br.aux["cdf.type"] = std::to_string(type);
    }
    if (br.rating < 0.0) {
        parse_error(line_no, tok[3].first_col, tok[3].last_col, "negative MVA rating");
    }
    return br;
}

// ---- writer helpers -------------------------------------------------------

/// Right-justified number in `width` columns using the most decimals (up to
/// max_decimals) that leave at least `min_blank` leading blanks.
std::string fit(double value, std::size_t width, int max_decimals, std::size_t min_blank = 1)
{
    char buf[64];
    if (value == 0.0) {
        value = 0.0;  // drop the sign of -0
    }
    for (int d = max_decimals; d >= 0; --d) {
        std::snprintf(buf, sizeof buf, "%.*f", d, value);
        std::string s(buf);
        if (s == "-0" || (s.find_first_not_of("-0.") == std::string::npos && s.front() == '-')) {
            s.erase(0, 1);
        }
        if (s.size() + min_blank <= width) {
            return std::string(width - s.size(), ' ') + s;
        }
    }
    throw Error(ErrorKind::UnsupportedFeature, "value " + std::to_string(value) + " does not fit a " +
                                                   std::to_string(width) + "-column CDF field");
}

std::string fit_text(std::string_view text, std::size_t width, bool left = false, std::size_t min_blank = 1)
{
    if (text.size() + min_blank > width) {
        throw Error(ErrorKind::UnsupportedFeature,
                    "field \"" + std::string(text) + "\" does not fit a " + std::to_string(width) + "-column CDF field");
    }
    const std::string pad(width - text.size(), ' ');
    return left ? std::string(text) + pad : pad + std::string(text);
}

class Card {
public:
    /// Places text so that its first character lands in `col` (1-based).
    void put(std::size_t col, std::string_view text)
    {
        if (line_.size() < col - 1 + text.size()) {
            line_.resize(col - 1 + text.size(), ' ');
        }
        line_.replace(col - 1, text.size(), text);
    }
    const std::string& str() const { return line_; }

private:
    std::string line_;
};

std::string aux_or(const AuxMap& aux, const std::string& key, std::string fallback)
{
    auto it = aux.find(key);
    return it == aux.end() ? fallback : it->second;
}

long bus_number(const std::string& id)
{
    long n = 0;
    auto [ptr, ec] = std::from_chars(id.data(), id.data() + id.size(), n);
    if (id.empty() || ec != std::errc() || ptr != id.data() + id.size() || n < 1 || n > 9999 ||
        std::to_string(n) != id) {
        throw Error(ErrorKind::UnsupportedFeature, "bus id \"" + id + "\" is not a CDF bus number (1..9999)");
    }
    return n;
}

}  // namespace

NetworkModel parse_cdf(std::string_view text)
{
    const Lines in(text);
    if (in.lines.empty() || trim(in.lines[0]).empty()) {
        throw Error(ErrorKind::Parse, "line 1: missing title card");
    }
    const auto title = in.lines[0];
    const double base = to_double(columns(title, 32, 37), 1, 32, 37, "MVA base");
    if (!(base > 0.0)) {
        parse_error(1, 32, 37, "MVA base must be > 0");
    }

    NetworkSpec spec;
    spec.layer = Layer::AcLoadflow;
    spec.base_mva = base;
    spec.aux["cdf.date"] = std::string(trim(columns(title, 2, 9)));
    spec.aux["cdf.originator"] = std::string(trim(columns(title, 11, 30)));
    spec.aux["cdf.year"] = std::string(trim(columns(title, 39, 42)));
    spec.aux["cdf.season"] = std::string(trim(columns(title, 44, 44)));
    spec.aux["cdf.case"] = std::string(trim(columns(title, 46, 73)));
    spec.id = spec.aux["cdf.case"].empty() ? "cdf" : spec.aux["cdf.case"];

    const auto bus_header = find_header(in, 1, "BUS DATA FOLLOWS");
    const auto bus_end = section_end(in, bus_header, "BUS DATA FOLLOWS");
    for (auto i = bus_header + 1; i < bus_end; ++i) {
        if (!trim(in.lines[i]).empty()) {
            spec.buses.push_back(parse_bus_card(in.lines[i], i + 1, base));
        }
    }

    const auto branch_header = find_header(in, bus_end + 1, "BRANCH DATA FOLLOWS");
    const auto branch_end = section_end(in, branch_header, "BRANCH DATA FOLLOWS");
    for (auto i = branch_header + 1; i < branch_end; ++i) {
        if (!trim(in.lines[i]).empty()) {
            spec.branches.push_back(parse_branch_card(in.lines[i], i + 1, base));
        }
    }

    std::string trailer;
    for (auto i = branch_end + 1; i < in.lines.size(); ++i) {
        trailer += in.lines[i];
        trailer += '\n';
    }
    while (!trailer.empty() && (trailer.back() == '\n')) {
        trailer.pop_back();
    }
    if (!trailer.empty()) {
        spec.aux["cdf.trailer"] = trailer;
    }
    return build_network(std::move(spec));
}

std::string write_cdf(const NetworkModel& net)
{
    if (net.layer() < Layer::AcLoadflow) {
        throw Error(ErrorKind::UnsupportedFeature, "CDF output needs an AcLoadflow (or higher) network");
    }
    if (!net.children().empty()) {
        throw Error(ErrorKind::UnsupportedFeature,
                    "network \"" + net.id() + "\" has child networks, which CDF cannot represent");
    }
    const double base = net.base_mva();
    const auto& aux = net.aux();
    std::string out;

    Card title;
    title.put(2, aux_or(aux, "cdf.date", "01/01/00").substr(0, 8));
    title.put(11, fit_text(aux_or(aux, "cdf.originator", "").substr(0, 20), 20, true, 0));
    title.put(32, fit(base, 6, 1, 0));
    title.put(39, fit_text(aux_or(aux, "cdf.year", "").substr(0, 4), 4, false, 0));
    title.put(44, aux_or(aux, "cdf.season", "S").substr(0, 1));
    title.put(46, aux_or(aux, "cdf.case", net.id()).substr(0, 28));
    out += title.str() + '\n';

    char header[64];
    std::snprintf(header, sizeof header, "%-40s%4zu ITEMS", "BUS DATA FOLLOWS", net.buses().size());
    out += header;
    out += '\n';
    for (const auto& bus : net.buses()) {
        if (!bus.in_service && bus.kind != BusKind::Isolated) {
            throw Error(ErrorKind::UnsupportedFeature, "out-of-service bus \"" + bus.id + "\" cannot be written to CDF");
        }
        if (bus.short_circuit || bus.machine) {
            throw Error(ErrorKind::UnsupportedFeature,
                        "bus \"" + bus.id + "\" carries short-circuit or machine data, which CDF cannot represent");
        }
        int type = 0;
        switch (bus.kind) {
        case BusKind::Slack: type = 3; break;
        case BusKind::PV: type = 2; break;
        case BusKind::PQ: type = aux_or(bus.aux, "cdf.type", "0") == "1" ? 1 : 0; break;
        case BusKind::Isolated: type = 4; break;
        }
        Card c;
        c.put(1, fit_text(std::to_string(bus_number(bus.id)), 4, false, 0));
        c.put(6, fit_text(bus.name.substr(0, 12), 12, true, 0));
        c.put(19, fit_text(std::to_string(bus.area), 2, false, 0));
        c.put(21, fit_text(aux_or(bus.aux, "cdf.loss_zone", "1"), 3));
        c.put(25, fit_text(std::to_string(type), 2));
        c.put(28, fit(bus.v_mag, 6, 4, 0));
        c.put(34, fit(bus.v_ang * kDegPerRad, 7, 4));
        c.put(41, fit(bus.load_p * base, 9, 4));
        c.put(50, fit(bus.load_q * base, 10, 4));
        c.put(60, fit(bus.gen_p * base, 8, 4));
        c.put(68, fit(bus.gen_q * base, 8, 4));
        c.put(77, fit(bus.base_kv, 7, 3));
        c.put(85, fit_text(aux_or(bus.aux, "cdf.desired_volts", "0.0"), 6));
        c.put(91, fit(bus.q_max * base, 8, 4));
        c.put(99, fit(bus.q_min * base, 8, 4));
        c.put(107, fit(bus.shunt_g, 8, 5));
        c.put(115, fit(bus.shunt_b, 8, 5));
        c.put(124, fit_text(aux_or(bus.aux, "cdf.remote_bus", "0"), 4));
        out += c.str() + '\n';
    }
    out += "-999\n";

    std::snprintf(header, sizeof header, "%-40s%4zu ITEMS", "BRANCH DATA FOLLOWS", net.branches().size());
    out += header;
    out += '\n';
    for (const auto& br : net.branches()) {
        if (!br.in_service) {
            throw Error(ErrorKind::UnsupportedFeature,
                        "out-of-service branch \"" + br.id + "\" cannot be written to CDF");
        }
        const bool line = br.kind == BranchKind::Line;
        const std::string type = line ? "0" : aux_or(br.aux, "cdf.type", br.phase_shift != 0.0 ? "4" : "1");
        Card c;
        c.put(1, fit_text(std::to_string(bus_number(br.from_bus)), 4, false, 0));
        c.put(6, fit_text(std::to_string(bus_number(br.to_bus)), 4, false, 0));
        c.put(11, fit_text(aux_or(br.aux, "cdf.area", "1"), 2, false, 0));
        c.put(13, fit_text(aux_or(br.aux, "cdf.loss_zone", "1"), 3));
        c.put(17, fit_text(aux_or(br.aux, "cdf.circuit", "1"), 1, false, 0));
        c.put(19, fit_text(type, 1, false, 0));
        c.put(20, fit(br.r, 10, 6));
        c.put(30, fit(br.x, 11, 6));
        c.put(41, fit(br.b_total, 10, 6));
        c.put(51, fit(br.rating * base, 5, 0));
        c.put(57, fit_text(aux_or(br.aux, "cdf.rating2", "0"), 5));
        c.put(63, fit_text(aux_or(br.aux, "cdf.rating3", "0"), 5));
        c.put(69, fit_text(aux_or(br.aux, "cdf.control_bus", "0"), 4));
        c.put(74, fit_text(aux_or(br.aux, "cdf.side", "0"), 1, false, 0));
        if (line) {
            c.put(77, fit_text(aux_or(br.aux, "cdf.ratio", "0.0"), 6));
        } else {
            c.put(77, fit(br.tap, 6, 4));
        }
        c.put(84, fit(br.phase_shift * kDegPerRad, 7, 3));
        c.put(91, fit_text(aux_or(br.aux, "cdf.tap_min", "0.0"), 7));
        c.put(98, fit_text(aux_or(br.aux, "cdf.tap_max", "0.0"), 7));
        c.put(106, fit_text(aux_or(br.aux, "cdf.step", "0.0"), 6));
        c.put(113, fit_text(aux_or(br.aux, "cdf.limit_min", "0.0"), 7));
        c.put(120, fit_text(aux_or(br.aux, "cdf.limit_max", "0.0"), 7));
        out += c.str() + '\n';
    }
    out += "-999\n";
    out += aux_or(aux, "cdf.trailer", "END OF DATA");
    out += '\n';
    return out;
}

}  // namespace gridengine
