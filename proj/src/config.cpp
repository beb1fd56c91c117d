#include "rgcsim/config.hpp"

#include <algorithm>
#include <array>
#include <charconv>
#include <cmath>
#include <fstream>
#include <functional>
#include <limits>
#include <map>
#include <optional>
#include <sstream>
#include <variant>

#include "rgcsim/report.hpp"

namespace rgcsim::frontend {

using nlohmann::json;

namespace {

const char* kind_name(ConfigError::Kind k)
{
    switch (k) {
    case ConfigError::Kind::Syntax: return "syntax error";
    case ConfigError::Kind::UnknownKey: return "unknown key";
    case ConfigError::Kind::Unit: return "unit error";
    case ConfigError::Kind::Range: return "invalid value";
    case ConfigError::Kind::MissingSection: return "missing section";
    case ConfigError::Kind::File: return "file error";
    }
    return "error";
}

}  // namespace

ConfigError::ConfigError(Kind kind, std::string location, const std::string& message)
    : std::runtime_error(location + ": " + kind_name(kind) + ": " + message),
      kind_(kind),
      location_(std::move(location))
{
}

// ---------------------------------------------------------------------------
// Quantities

double parse_quantity(std::string_view text)
{
    std::string_view s = text;
    const bool plus = !s.empty() && s.front() == '+';
    if (plus)
        s.remove_prefix(1);
    double v = 0.0;
    const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc{} || ptr == s.data() || (plus && !s.empty() && s.front() == '-'))
        throw std::invalid_argument("'" + std::string(text) + "' is not a number");
    std::string_view rest(ptr, static_cast<std::size_t>(s.data() + s.size() - ptr));
    if (rest.empty())
        return v;

    static constexpr std::array<std::string_view, 10> units{"A", "V", "S", "s", "W",
                                                            "J", "F", "Hz", "Ohm", "ohm"};
    const auto is_unit = [](std::string_view u) {
        return std::find(units.begin(), units.end(), u) != units.end();
    };
    if (is_unit(rest))
        return v;

    int exp10 = 0;
    switch (rest.front()) {
    case 'f': exp10 = -15; break;
    case 'p': exp10 = -12; break;
    case 'n': exp10 = -9; break;
    case 'u': exp10 = -6; break;
    case 'm': exp10 = -3; break;
    case 'k':
    case 'K': exp10 = 3; break;
    case 'M': exp10 = 6; break;
    case 'G': exp10 = 9; break;
    default: break;
    }
    const std::string_view unit = rest.substr(1);
    if (exp10 == 0 || (!unit.empty() && !is_unit(unit)))
        throw std::invalid_argument("unknown suffix or unit '" + std::string(rest) + "' in '" +
                                    std::string(text) + "'");
    // Reparse as a decimal exponent so "5u" is the same double as 5e-6.
    std::string_view mant(s.data(), static_cast<std::size_t>(ptr - s.data()));
    if (mant.find_first_of("eE") != std::string_view::npos)
        return v * std::pow(10.0, exp10);
    const std::string sci = std::string(mant) + "e" + std::to_string(exp10);
    double scaled = 0.0;
    std::from_chars(sci.data(), sci.data() + sci.size(), scaled);
    return scaled;
}

// ---------------------------------------------------------------------------
// Relaxed tree parser

namespace {

enum class Tok { LBrace, RBrace, LBracket, RBracket, Assign, Comma, String, Word, Number, End };

struct Token {
    Tok type = Tok::End;
    std::string text;
    int line = 1;
    int col = 1;
    int end_line = 1;
};

class Lexer {
public:
    Lexer(std::string_view src, std::string_view name) : src_(src), name_(name) {}

    Token next()
    {
        skip_space();
        Token t;
        t.line = line_;
        t.col = col_;
        if (pos_ >= src_.size()) {
            t.type = Tok::End;
            t.end_line = line_;
            return t;
        }
        const char c = src_[pos_];
        auto single = [&](Tok type) {
            advance();
            t.type = type;
            t.text = std::string(1, c);
        };
        switch (c) {
        case '{': single(Tok::LBrace); break;
        case '}': single(Tok::RBrace); break;
        case '[': single(Tok::LBracket); break;
        case ']': single(Tok::RBracket); break;
        case ':':
        case '=': single(Tok::Assign); break;
        case ',': single(Tok::Comma); break;
        case '"': t.type = Tok::String; t.text = string_literal(t); break;
        default:
            if (std::isdigit(static_cast<unsigned char>(c)) || c == '-' || c == '+' || c == '.') {
                t.type = Tok::Number;
                while (pos_ < src_.size() && is_word_char(src_[pos_], true))
                    t.text += advance();
            } else if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') {
                t.type = Tok::Word;
                while (pos_ < src_.size() && is_word_char(src_[pos_], false))
                    t.text += advance();
            } else {
                throw error(t.line, t.col, std::string("unexpected character '") + c + "'");
            }
        }
        t.end_line = line_;
        return t;
    }

    ConfigError error(int line, int col, const std::string& msg) const
    {
        return ConfigError(ConfigError::Kind::Syntax, location(line, col), msg);
    }

    std::string location(int line, int col) const
    {
        return std::string(name_) + ":" + std::to_string(line) + ":" + std::to_string(col);
    }

private:
    static bool is_word_char(char c, bool number)
    {
        const auto u = static_cast<unsigned char>(c);
        if (std::isalnum(u) || c == '_' || c == '.')
            return true;
        return number && (c == '-' || c == '+');
    }

    char advance()
    {
        const char c = src_[pos_++];
        if (c == '\n') {
            ++line_;
            col_ = 1;
        } else {
            ++col_;
        }
        return c;
    }

    void skip_space()
    {
        while (pos_ < src_.size()) {
            const char c = src_[pos_];
            if (c == '#' || (c == '/' && pos_ + 1 < src_.size() && src_[pos_ + 1] == '/')) {
                while (pos_ < src_.size() && src_[pos_] != '\n')
                    advance();
            } else if (std::isspace(static_cast<unsigned char>(c))) {
                advance();
            } else {
                break;
            }
        }
    }

    std::string string_literal(const Token& start)
    {
        std::string raw = "\"";
        advance();
        while (true) {
            if (pos_ >= src_.size() || src_[pos_] == '\n')
                throw error(start.line, start.col, "unterminated string");
            const char c = advance();
            raw += c;
            if (c == '\\') {
                if (pos_ >= src_.size())
                    throw error(start.line, start.col, "unterminated string");
                raw += advance();
            } else if (c == '"') {
                break;
            }
        }
        try {
            return json::parse(raw).get<std::string>();
        } catch (const json::exception&) {
            throw error(start.line, start.col, "invalid string escape");
        }
    }

    std::string_view src_;
    std::string_view name_;
    std::size_t pos_ = 0;
    int line_ = 1;
    int col_ = 1;
};

class TreeParser {
public:
    TreeParser(std::string_view src, std::string_view name) : lex_(src, name) { tok_ = lex_.next(); }

    json document()
    {
        json root;
        if (tok_.type == Tok::LBrace) {
            root = object("");
        } else {
            root = members("", Tok::End);
        }
        if (tok_.type != Tok::End)
            throw lex_.error(tok_.line, tok_.col, "unexpected '" + tok_.text + "' after document");
        return root;
    }

private:
    void bump() { tok_ = lex_.next(); }

    json object(const std::string& path)
    {
        bump();  // {
        json o = members(path, Tok::RBrace);
        bump();  // }
        return o;
    }

    json members(const std::string& path, Tok close)
    {
        json o = json::object();
        while (tok_.type != close) {
            if (tok_.type == Tok::End)
                throw lex_.error(tok_.line, tok_.col, "unexpected end of input, missing '}'");
            if (tok_.type != Tok::Word && tok_.type != Tok::String)
                throw lex_.error(tok_.line, tok_.col, "expected a key, found '" + tok_.text + "'");
            const Token key = tok_;
            const std::string full = path.empty() ? key.text : path + "." + key.text;
            bump();
            // "key { ... }" opens a section without '='.
            if (tok_.type == Tok::Assign)
                bump();
            else if (tok_.type != Tok::LBrace)
                throw lex_.error(tok_.line, tok_.col,
                                 "expected ':' or '=' after key '" + full + "'");
            if (o.contains(key.text))
                throw lex_.error(key.line, key.col, "duplicate key '" + full + "'");
            o[key.text] = value(full);
            if (tok_.type == Tok::Comma)
                bump();
        }
        return o;
    }

    json value(const std::string& path)
    {
        switch (tok_.type) {
        case Tok::LBrace: return object(path);
        case Tok::LBracket: {
            bump();
            json a = json::array();
            while (tok_.type != Tok::RBracket) {
                if (tok_.type == Tok::End)
                    throw lex_.error(tok_.line, tok_.col, "unexpected end of input, missing ']'");
                a.push_back(value(path + "[" + std::to_string(a.size()) + "]"));
                if (tok_.type == Tok::Comma)
                    bump();
            }
            bump();
            return a;
        }
        case Tok::String: {
            json s = tok_.text;
            bump();
            return s;
        }
        case Tok::Word: {
            const Token w = tok_;
            bump();
            if (w.text == "true")
                return true;
            if (w.text == "false")
                return false;
            if (w.text == "null")
                return nullptr;
            return w.text;
        }
        case Tok::Number: return number(path);
        default:
            throw lex_.error(tok_.line, tok_.col, "expected a value for '" + path + "', found '" +
                                                      tok_.text + "'");
        }
    }

    json number(const std::string& path)
    {
        const Token n = tok_;
        bump();
        // A word trailing a number on the same line is an attempted unit.
        if (tok_.type == Tok::Word && tok_.line == n.end_line) {
            const Token w = tok_;
            const Token saved = tok_;
            Token after = lex_peek_after_word();
            if (after.type != Tok::Assign)
                throw ConfigError(ConfigError::Kind::Unit, lex_.location(w.line, w.col),
                                  "unknown unit '" + w.text + "' for key '" + path + "'");
            (void)saved;
        }
        const bool integer = !n.text.empty() &&
                             n.text.find_first_not_of("0123456789", n.text[0] == '-' ? 1 : 0) ==
                                 std::string::npos &&
                             n.text != "-";
        if (integer) {
            if (n.text[0] == '-') {
                std::int64_t v = 0;
                auto [p, ec] = std::from_chars(n.text.data(), n.text.data() + n.text.size(), v);
                if (ec == std::errc{} && p == n.text.data() + n.text.size())
                    return v;
            } else {
                std::uint64_t v = 0;
                auto [p, ec] = std::from_chars(n.text.data(), n.text.data() + n.text.size(), v);
                if (ec == std::errc{} && p == n.text.data() + n.text.size())
                    return v;
            }
        }
        try {
            return parse_quantity(n.text);
        } catch (const std::invalid_argument& e) {
            throw ConfigError(ConfigError::Kind::Unit, lex_.location(n.line, n.col),
                              std::string(e.what()) + " for key '" + path + "'");
        }
    }

    // Looks past the current word token without consuming it.
    Token lex_peek_after_word()
    {
        Lexer copy = lex_;
        return copy.next();
    }

    Lexer lex_;
    Token tok_;
};

}  // namespace

json parse_tree(std::string_view text, std::string_view source)
{
    return TreeParser(text, source).document();
}

// ---------------------------------------------------------------------------
// Field registry

namespace {

using FieldValue = std::variant<double, std::int64_t, std::uint64_t, bool, std::string,
                                std::vector<double>, Rows, std::vector<LayerEntry>>;

enum class Rule { Any, Positive, NonNegative, PositiveOrInf };

struct Field {
    std::string path;
    std::function<FieldValue(const SimConfig&)> get;
    std::function<void(SimConfig&, const json&)> set;
};

[[noreturn]] void range_error(const std::string& path, const std::string& msg)
{
    throw ConfigError(ConfigError::Kind::Range, path, msg);
}

double as_real(const json& v, const std::string& path)
{
    if (v.is_number())
        return v.get<double>();
    if (v.is_string()) {
        const auto& s = v.get_ref<const std::string&>();
        if (s == "inf")
            return std::numeric_limits<double>::infinity();
        try {
            return parse_quantity(s);
        } catch (const std::invalid_argument& e) {
            throw ConfigError(ConfigError::Kind::Unit, path, e.what());
        }
    }
    range_error(path, "expected a number");
}

void check_rule(double x, Rule rule, const std::string& path)
{
    switch (rule) {
    case Rule::Any:
        if (!std::isfinite(x))
            range_error(path, "must be finite");
        break;
    case Rule::Positive:
        if (!(x > 0.0) || !std::isfinite(x))
            range_error(path, "must be > 0 and finite");
        break;
    case Rule::NonNegative:
        if (!(x >= 0.0) || !std::isfinite(x))
            range_error(path, "must be >= 0 and finite");
        break;
    case Rule::PositiveOrInf:
        if (!(x > 0.0))
            range_error(path, "must be > 0 (inf allowed)");
        break;
    }
}

std::int64_t as_int(const json& v, const std::string& path)
{
    if (v.is_number_integer())
        return v.get<std::int64_t>();
    if (v.is_number_float()) {
        const double d = v.get<double>();
        if (std::nearbyint(d) == d && std::abs(d) < 9e15)
            return static_cast<std::int64_t>(d);
    }
    range_error(path, "expected an integer");
}

std::vector<double> as_vector(const json& v, const std::string& path)
{
    if (!v.is_array())
        range_error(path, "expected an array of numbers");
    std::vector<double> out;
    for (std::size_t k = 0; k < v.size(); ++k) {
        const std::string p = path + "[" + std::to_string(k) + "]";
        const double x = as_real(v[k], p);
        check_rule(x, Rule::Any, p);
        out.push_back(x);
    }
    return out;
}

Rows as_rows(const json& v, const std::string& path)
{
    if (!v.is_array())
        range_error(path, "expected an array of rows");
    Rows out;
    for (std::size_t k = 0; k < v.size(); ++k) {
        out.push_back(as_vector(v[k], path + "[" + std::to_string(k) + "]"));
        if (out.back().size() != out.front().size())
            range_error(path, "rows must have equal length");
    }
    return out;
}

template <class Acc>
Field real(std::string path, Acc acc, Rule rule = Rule::Any)
{
    return {path, [acc](const SimConfig& c) { return FieldValue(acc(c)); },
            [acc, rule, path](SimConfig& c, const json& v) {
                const double x = as_real(v, path);
                check_rule(x, rule, path);
                acc(c) = x;
            }};
}

template <class Acc>
Field integer(std::string path, Acc acc, std::int64_t lo, std::int64_t hi)
{
    return {path, [acc](const SimConfig& c) { return FieldValue(std::int64_t(acc(c))); },
            [acc, lo, hi, path](SimConfig& c, const json& v) {
                const std::int64_t x = as_int(v, path);
                if (x < lo || x > hi)
                    range_error(path, "must be in [" + std::to_string(lo) + ", " +
                                          std::to_string(hi) + "]");
                acc(c) = x;
            }};
}

template <class Acc>
Field boolean(std::string path, Acc acc)
{
    return {path, [acc](const SimConfig& c) { return FieldValue(bool(acc(c))); },
            [acc, path](SimConfig& c, const json& v) {
                if (!v.is_boolean())
                    range_error(path, "expected true or false");
                acc(c) = v.get<bool>();
            }};
}

template <class Acc>
Field choice(std::string path, Acc acc, std::vector<std::string> allowed)
{
    return {path, [acc](const SimConfig& c) { return FieldValue(std::string(acc(c))); },
            [acc, allowed, path](SimConfig& c, const json& v) {
                if (!v.is_string() ||
                    std::find(allowed.begin(), allowed.end(), v.get<std::string>()) == allowed.end()) {
                    std::string opts;
                    for (const auto& a : allowed)
                        opts += (opts.empty() ? "" : ", ") + a;
                    range_error(path, "expected one of: " + opts);
                }
                acc(c) = v.get<std::string>();
            }};
}

template <class Acc>
Field text(std::string path, Acc acc)
{
    return {path, [acc](const SimConfig& c) { return FieldValue(std::string(acc(c))); },
            [acc, path](SimConfig& c, const json& v) {
                if (!v.is_string())
                    range_error(path, "expected a string");
                acc(c) = v.get<std::string>();
            }};
}

template <class Acc>
Field vector_field(std::string path, Acc acc)
{
    return {path, [acc](const SimConfig& c) { return FieldValue(acc(c)); },
            [acc, path](SimConfig& c, const json& v) { acc(c) = as_vector(v, path); }};
}

template <class Acc>
Field rows_field(std::string path, Acc acc)
{
    return {path, [acc](const SimConfig& c) { return FieldValue(acc(c)); },
            [acc, path](SimConfig& c, const json& v) { acc(c) = as_rows(v, path); }};
}

std::vector<LayerEntry> as_layers(const json& v, const std::string& path);

Field layers_field(std::string path)
{
    return {path, [](const SimConfig& c) { return FieldValue(c.network.layers); },
            [path](SimConfig& c, const json& v) { c.network.layers = as_layers(v, path); }};
}

void add_device(std::vector<Field>& f, const std::string& name, neuron::MosParams neuron::RgcParams::*m)
{
    const std::string base = "devices." + name + ".";
    f.push_back(real(base + "beta", [m](auto& c) -> auto& { return (c.neuron.*m).beta; }, Rule::Positive));
    f.push_back(real(base + "vt", [m](auto& c) -> auto& { return (c.neuron.*m).vt; }));
    f.push_back(real(base + "lambda", [m](auto& c) -> auto& { return (c.neuron.*m).lambda; }, Rule::NonNegative));
    f.push_back(Field{base + "polarity",
                      [m](const SimConfig& c) {
                          return FieldValue(std::string((c.neuron.*m).polarity == device::Polarity::Nmos ? "nmos" : "pmos"));
                      },
                      [m, base](SimConfig& c, const json& v) {
                          if (!v.is_string() || (v != "nmos" && v != "pmos"))
                              range_error(base + "polarity", "expected one of: nmos, pmos");
                          (c.neuron.*m).polarity = v == "nmos" ? device::Polarity::Nmos : device::Polarity::Pmos;
                      }});
}

const std::vector<Field>& fields()
{
    static const std::vector<Field> table = [] {
        std::vector<Field> f;
        f.push_back(choice("preset", [](auto& c) -> auto& { return c.preset; }, {"reference"}));
        add_device(f, "m1", &neuron::RgcParams::m1);
        add_device(f, "m2", &neuron::RgcParams::m2);
        add_device(f, "m3", &neuron::RgcParams::m3);
        add_device(f, "m5", &neuron::RgcParams::m5);

        f.push_back(real("neuron.ib", [](auto& c) -> auto& { return c.neuron.ib; }, Rule::Positive));
        f.push_back(real("neuron.ib2", [](auto& c) -> auto& { return c.neuron.ib2; }, Rule::Positive));
        f.push_back(real("neuron.ro_b2", [](auto& c) -> auto& { return c.neuron.ro_b2; }, Rule::PositiveOrInf));
        f.push_back(real("neuron.vc", [](auto& c) -> auto& { return c.neuron.vc; }));
        f.push_back(real("neuron.ic", [](auto& c) -> auto& { return c.neuron.ic; }, Rule::Positive));
        f.push_back(real("neuron.vdd", [](auto& c) -> auto& { return c.neuron.vdd; }, Rule::Positive));
        f.push_back(real("neuron.vb3", [](auto& c) -> auto& { return c.neuron.vb3; }));
        f.push_back(real("neuron.r_load", [](auto& c) -> auto& { return c.neuron.r_load; }, Rule::Positive));
        f.push_back(real("neuron.dac.i_unit", [](auto& c) -> auto& { return c.neuron.dac.i_unit; }, Rule::Positive));
        f.push_back(real("neuron.dac_out.i_unit", [](auto& c) -> auto& { return c.neuron.dac_out.i_unit; }, Rule::Positive));

        f.push_back(real("op.i_in", [](auto& c) -> auto& { return c.op.i_in; }));
        f.push_back(integer("op.code_in", [](auto& c) -> auto& { return c.op.code_in; }, 0, (1 << 24) - 1));
        f.push_back(integer("op.code_out", [](auto& c) -> auto& { return c.op.code_out; }, 0, (1 << 24) - 1));

        f.push_back(integer("crossbar.rows", [](auto& c) -> auto& { return c.crossbar.rows; }, 0, 256));
        f.push_back(integer("crossbar.cols", [](auto& c) -> auto& { return c.crossbar.cols; }, 0, 256));
        f.push_back(real("crossbar.g_min", [](auto& c) -> auto& { return c.crossbar.g_min; }, Rule::Positive));
        f.push_back(real("crossbar.g_max", [](auto& c) -> auto& { return c.crossbar.g_max; }, Rule::Positive));
        f.push_back(text("crossbar.csv", [](auto& c) -> auto& { return c.crossbar.csv; }));
        f.push_back(rows_field("crossbar.g", [](auto& c) -> auto& { return c.crossbar.g; }));
        f.push_back(vector_field("crossbar.inputs", [](auto& c) -> auto& { return c.crossbar.inputs; }));
        f.push_back(choice("crossbar.mode", [](auto& c) -> auto& { return c.crossbar.mode; }, {"voltage", "current"}));
        f.push_back(real("crossbar.r_wire_row", [](auto& c) -> auto& { return c.crossbar.r_wire_row; }, Rule::NonNegative));
        f.push_back(real("crossbar.r_wire_col", [](auto& c) -> auto& { return c.crossbar.r_wire_col; }, Rule::NonNegative));
        f.push_back(real("crossbar.r_neuron_in", [](auto& c) -> auto& { return c.crossbar.r_neuron_in; }, Rule::NonNegative));

        f.push_back(integer("sar.nbits", [](auto& c) -> auto& { return c.sar.nbits; }, 1, 24));
        f.push_back(real("sar.t_step", [](auto& c) -> auto& { return c.sar.t_step; }, Rule::Positive));
        f.push_back(real("sar.vref_in", [](auto& c) -> auto& { return c.sar.vref_in; }));
        f.push_back(real("sar.vref_out", [](auto& c) -> auto& { return c.sar.vref_out; }, Rule::NonNegative));
        f.push_back(real("sar.comparator_offset", [](auto& c) -> auto& { return c.sar.comparator_offset; }));
        f.push_back(choice("sar.mode", [](auto& c) -> auto& { return c.sar.mode; }, {"sequential", "interleaved"}));
        f.push_back(integer("sar.grid_points", [](auto& c) -> auto& { return c.sar.grid_points; }, 2, 10000000));
        f.push_back(integer("sar.n_max", [](auto& c) -> auto& { return c.sar.n_max; }, 1, 52));

        f.push_back(real("mismatch.sigma_vt", [](auto& c) -> auto& { return c.mismatch.sigma_vt; }, Rule::NonNegative));
        f.push_back(real("mismatch.sigma_beta_rel", [](auto& c) -> auto& { return c.mismatch.sigma_beta_rel; }, Rule::NonNegative));

        f.push_back(integer("mc.runs", [](auto& c) -> auto& { return c.mc.runs; }, 0, 10000000));
        f.push_back(Field{"mc.seed", [](const SimConfig& c) { return FieldValue(c.mc.seed); },
                          [](SimConfig& c, const json& v) {
                              if (!v.is_number_unsigned())
                                  range_error("mc.seed", "expected a non-negative integer");
                              c.mc.seed = v.get<std::uint64_t>();
                          }});
        f.push_back(boolean("mc.calibrate", [](auto& c) -> auto& { return c.mc.calibrate; }));
        f.push_back(integer("mc.workers", [](auto& c) -> auto& { return c.mc.workers; }, 1, 256));

        f.push_back(layers_field("network.layers"));
        f.push_back(integer("network.bits", [](auto& c) -> auto& { return c.network.bits; }, 1, 30));
        f.push_back(choice("network.fidelity", [](auto& c) -> auto& { return c.network.fidelity; },
                           {"ideal_math", "circuit_ideal", "circuit_nonideal"}));
        f.push_back(text("network.inputs_csv", [](auto& c) -> auto& { return c.network.inputs_csv; }));
        f.push_back(rows_field("network.inputs", [](auto& c) -> auto& { return c.network.inputs; }));
        f.push_back(real("network.v_read", [](auto& c) -> auto& { return c.network.v_read; }, Rule::Positive));
        f.push_back(real("network.i_full_scale", [](auto& c) -> auto& { return c.network.i_full_scale; }, Rule::Positive));
        f.push_back(real("network.g_min", [](auto& c) -> auto& { return c.network.g_min; }, Rule::Positive));
        f.push_back(real("network.g_max", [](auto& c) -> auto& { return c.network.g_max; }, Rule::Positive));
        f.push_back(real("network.r_wire_row", [](auto& c) -> auto& { return c.network.r_wire_row; }, Rule::NonNegative));
        f.push_back(real("network.r_wire_col", [](auto& c) -> auto& { return c.network.r_wire_col; }, Rule::NonNegative));

        f.push_back(real("energy.t_eval", [](auto& c) -> auto& { return c.energy.t_eval; }, Rule::NonNegative));
        f.push_back(real("energy.p_neuron", [](auto& c) -> auto& { return c.energy.p_neuron; }, Rule::NonNegative));
        f.push_back(real("energy.t_sar_step", [](auto& c) -> auto& { return c.energy.t_sar_step; }, Rule::NonNegative));
        f.push_back(real("energy.p_sar", [](auto& c) -> auto& { return c.energy.p_sar; }, Rule::NonNegative));
        f.push_back(real("energy.n_inferences", [](auto& c) -> auto& { return c.energy.n_inferences; }, Rule::Positive));
        f.push_back(real("energy.e_mac", [](auto& c) -> auto& { return c.energy.e_mac; }, Rule::NonNegative));
        f.push_back(real("energy.e_act", [](auto& c) -> auto& { return c.energy.e_act; }, Rule::NonNegative));

        f.push_back(text("output.path", [](auto& c) -> auto& { return c.output.path; }));
        f.push_back(choice("output.format", [](auto& c) -> auto& { return c.output.format; }, {"json", "csv", "text"}));
        return f;
    }();
    return table;
}

std::size_t edit_distance(const std::string& a, const std::string& b)
{
    std::vector<std::size_t> prev(b.size() + 1), cur(b.size() + 1);
    for (std::size_t j = 0; j <= b.size(); ++j)
        prev[j] = j;
    for (std::size_t i = 1; i <= a.size(); ++i) {
        cur[0] = i;
        for (std::size_t j = 1; j <= b.size(); ++j)
            cur[j] = std::min({prev[j] + 1, cur[j - 1] + 1,
                               prev[j - 1] + (a[i - 1] == b[j - 1] ? 0 : 1)});
        std::swap(prev, cur);
    }
    return prev[b.size()];
}

[[noreturn]] void unknown_key(const std::string& path, const std::string& key,
                              const std::vector<std::string>& siblings)
{
    std::string best;
    std::size_t best_d = std::numeric_limits<std::size_t>::max();
    for (const auto& s : siblings) {
        const std::size_t d = edit_distance(key, s);
        if (d < best_d) {
            best_d = d;
            best = s;
        }
    }
    std::string msg = "unknown key '" + path + "'";
    if (!best.empty() && best_d <= std::max<std::size_t>(2, key.size() / 2))
        msg += "; did you mean '" + best + "'?";
    throw ConfigError(ConfigError::Kind::UnknownKey, path, msg);
}

std::vector<LayerEntry> as_layers(const json& v, const std::string& path)
{
    if (!v.is_array())
        range_error(path, "expected an array of layer objects");
    static const std::vector<std::string> keys{"activation", "csv", "threshold", "weights"};
    std::vector<LayerEntry> out;
    for (std::size_t k = 0; k < v.size(); ++k) {
        const std::string lp = path + "[" + std::to_string(k) + "]";
        if (!v[k].is_object())
            range_error(lp, "expected a layer object");
        LayerEntry e;
        for (auto it = v[k].begin(); it != v[k].end(); ++it) {
            const std::string kp = lp + "." + it.key();
            if (it.key() == "csv") {
                if (!it->is_string())
                    range_error(kp, "expected a string");
                e.csv = it->get<std::string>();
            } else if (it.key() == "weights") {
                e.weights = as_rows(*it, kp);
            } else if (it.key() == "activation") {
                if (!it->is_string() || (*it != "linear" && *it != "threshold"))
                    range_error(kp, "expected one of: linear, threshold");
                e.activation = it->get<std::string>();
            } else if (it.key() == "threshold") {
                e.threshold = as_real(*it, kp);
                check_rule(e.threshold, Rule::Any, kp);
            } else {
                unknown_key(kp, it.key(), keys);
            }
        }
        if (e.csv.empty() == e.weights.empty())
            range_error(lp, "give exactly one of 'csv' or 'weights'");
        out.push_back(std::move(e));
    }
    return out;
}

const Field* find_field(const std::string& path)
{
    for (const auto& f : fields())
        if (f.path == path)
            return &f;
    return nullptr;
}

std::vector<std::string> children_of(const std::string& prefix)
{
    std::vector<std::string> out;
    const std::string p = prefix.empty() ? "" : prefix + ".";
    for (const auto& f : fields()) {
        if (f.path.compare(0, p.size(), p) != 0)
            continue;
        const std::string rest = f.path.substr(p.size());
        const std::string child = rest.substr(0, rest.find('.'));
        if (std::find(out.begin(), out.end(), child) == out.end())
            out.push_back(child);
    }
    return out;
}

bool is_section(const std::string& path)
{
    const std::string p = path + ".";
    return std::any_of(fields().begin(), fields().end(),
                       [&](const Field& f) { return f.path.compare(0, p.size(), p) == 0; });
}

void apply(SimConfig& cfg, const json& obj, const std::string& prefix)
{
    for (auto it = obj.begin(); it != obj.end(); ++it) {
        const std::string path = prefix.empty() ? it.key() : prefix + "." + it.key();
        if (const Field* f = find_field(path)) {
            f->set(cfg, it.value());
            cfg.explicit_keys.insert(path);
        } else if (is_section(path)) {
            if (!it->is_object())
                range_error(path, "expected a section object");
            apply(cfg, it.value(), path);
        } else {
            unknown_key(path, it.key(), children_of(prefix));
        }
    }
}

void check_file(const SimConfig& cfg, const std::string& rel, const std::string& key)
{
    if (rel.empty())
        return;
    const auto p = cfg.base_dir / rel;
    if (!std::filesystem::is_regular_file(p))
        throw ConfigError(ConfigError::Kind::File, key, "referenced file '" + p.string() +
                                                           "' does not exist");
}

void cross_validate(SimConfig& cfg)
{
    cfg.neuron.dac.nbits = static_cast<int>(cfg.sar.nbits);
    cfg.neuron.dac_out.nbits = static_cast<int>(cfg.sar.nbits);
    try {
        neuron::validate(cfg.neuron);
    } catch (const std::invalid_argument& e) {
        range_error("neuron", e.what());
    }
    if (cfg.crossbar.g_max < cfg.crossbar.g_min)
        range_error("crossbar.g_max", "must be >= crossbar.g_min");
    if (cfg.network.g_max < cfg.network.g_min)
        range_error("network.g_max", "must be >= network.g_min");
    if (!cfg.crossbar.csv.empty() && !cfg.crossbar.g.empty())
        range_error("crossbar", "give either 'csv' or 'g', not both");
    if (!cfg.crossbar.g.empty()) {
        if (cfg.crossbar.rows != 0 && static_cast<std::size_t>(cfg.crossbar.rows) != cfg.crossbar.g.size())
            range_error("crossbar.rows", "does not match the rows of crossbar.g");
        if (cfg.crossbar.cols != 0 && static_cast<std::size_t>(cfg.crossbar.cols) != cfg.crossbar.g.front().size())
            range_error("crossbar.cols", "does not match the columns of crossbar.g");
    }
    if (!cfg.network.inputs_csv.empty() && !cfg.network.inputs.empty())
        range_error("network", "give either 'inputs_csv' or 'inputs', not both");
    check_file(cfg, cfg.crossbar.csv, "crossbar.csv");
    check_file(cfg, cfg.network.inputs_csv, "network.inputs_csv");
    for (std::size_t k = 0; k < cfg.network.layers.size(); ++k)
        check_file(cfg, cfg.network.layers[k].csv, "network.layers[" + std::to_string(k) + "].csv");
}

json value_to_json(const FieldValue& v)
{
    return std::visit(
        [](const auto& x) -> json {
            using T = std::decay_t<decltype(x)>;
            if constexpr (std::is_same_v<T, double>) {
                if (std::isinf(x))
                    return "inf";
                return x;
            } else if constexpr (std::is_same_v<T, std::vector<LayerEntry>>) {
                json a = json::array();
                for (const auto& e : x) {
                    json o{{"activation", e.activation}, {"threshold", e.threshold}};
                    if (!e.csv.empty())
                        o["csv"] = e.csv;
                    else
                        o["weights"] = e.weights;
                    a.push_back(o);
                }
                return a;
            } else {
                return x;
            }
        },
        v);
}

}  // namespace

std::vector<std::string> config_keys()
{
    std::vector<std::string> out;
    for (const auto& f : fields())
        out.push_back(f.path);
    return out;
}

bool SimConfig::operator==(const SimConfig& other) const
{
    for (const auto& f : fields())
        if (f.get(*this) != f.get(other))
            return false;
    return neuron == other.neuron;
}

SimConfig parse_config(std::string_view text, const std::filesystem::path& base_dir,
                       std::string_view source)
{
    const json tree = parse_tree(text, source);
    SimConfig cfg;
    cfg.base_dir = base_dir;
    if (tree.contains("preset")) {
        // Only one preset exists; the check runs before anything else is applied.
        find_field("preset")->set(cfg, tree["preset"]);
    }
    apply(cfg, tree, "");
    cross_validate(cfg);
    return cfg;
}

SimConfig load_config(const std::filesystem::path& path)
{
    std::ifstream f(path);
    if (!f)
        throw IoError("cannot read config file '" + path.string() + "'");
    std::ostringstream buf;
    buf << f.rdbuf();
    return parse_config(buf.str(), path.parent_path().empty() ? "." : path.parent_path(),
                        path.string());
}

std::string emit_config(const SimConfig& cfg)
{
    json root = json::object();
    for (const auto& f : fields()) {
        json* node = &root;
        std::string rest = f.path;
        for (auto dot = rest.find('.'); dot != std::string::npos; dot = rest.find('.')) {
            node = &(*node)[rest.substr(0, dot)];
            rest = rest.substr(dot + 1);
        }
        (*node)[rest] = value_to_json(f.get(cfg));
    }
    return canonical_json(root) + "\n";
}

// Where the report goes does not change what it says.
std::string config_digest(const SimConfig& cfg)
{
    SimConfig c = cfg;
    c.output = {};
    return fnv1a_hex(emit_config(c));
}

}  // namespace rgcsim::frontend
