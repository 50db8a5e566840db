#include <cctype>
#include <charconv>

#include "ham/scheme.hpp"
#include "scheme_internal.hpp"

namespace ham::scheme {

namespace {

const char* kKeywordNames[] = {
    "quote", "if", "define", "set!", "lambda", "begin", "let", "let*",
    "letrec", "cond", "case", "else", "=>", "and", "or", "do",
};

Kw kwFromName(std::string_view n) {
  static const std::unordered_map<std::string_view, Kw> byName = [] {
    std::unordered_map<std::string_view, Kw> m;
    Kw ks[] = {Kw::Quote, Kw::If,   Kw::Define, Kw::Set,  Kw::Lambda, Kw::Begin,
               Kw::Let,   Kw::LetStar, Kw::LetRec, Kw::Cond, Kw::Case, Kw::Else,
               Kw::Arrow, Kw::And,  Kw::Or,     Kw::Do};
    for (std::size_t i = 0; i < std::size(kKeywordNames); ++i) m[kKeywordNames[i]] = ks[i];
    return m;
  }();
  auto it = byName.find(n);
  return it == byName.end() ? Kw::None : it->second;
}

}  // namespace

const std::vector<std::shared_ptr<const std::string>>& core_symbols() {
  static const std::vector<std::shared_ptr<const std::string>> syms = [] {
    std::vector<std::shared_ptr<const std::string>> v;
    for (const char* k : kKeywordNames) v.push_back(std::make_shared<const std::string>(k));
    for (const auto& e : stdlib_manifest()) v.push_back(std::make_shared<const std::string>(e.name));
    return v;
  }();
  return syms;
}

Kw keyword_of(const Symbol& s) {
  static const std::unordered_map<const std::string*, Kw> byPtr = [] {
    std::unordered_map<const std::string*, Kw> m;
    for (const auto& p : core_symbols()) {
      Kw k = kwFromName(*p);
      if (k != Kw::None) m[p.get()] = k;
    }
    return m;
  }();
  auto it = byPtr.find(s.name.get());
  if (it != byPtr.end()) return it->second;
  return kwFromName(s.str());
}

Interner::Interner() {
  for (const auto& p : core_symbols()) map_.emplace(*p, p);
}

Symbol Interner::intern(std::string_view name) {
  auto it = map_.find(name);
  if (it != map_.end()) return Symbol{it->second};
  auto owned = std::make_shared<const std::string>(name);
  map_.emplace(*owned, owned);
  return Symbol{owned};
}

namespace {

bool isDelimiter(char c) {
  return std::isspace(static_cast<unsigned char>(c)) || c == '(' || c == ')' ||
         c == '"' || c == ';';
}

class Reader {
 public:
  explicit Reader(std::string_view src) : src_(src) {}

  std::vector<Value> readAll() {
    std::vector<Value> forms;
    skipAtmosphere();
    while (pos_ < src_.size()) {
      forms.push_back(readDatum());
      skipAtmosphere();
    }
    return forms;
  }

 private:
  [[noreturn]] void err(const std::string& msg) {
    throw ParseError(msg + " at offset " + std::to_string(pos_));
  }

  void skipAtmosphere() {
    while (pos_ < src_.size()) {
      char c = src_[pos_];
      if (std::isspace(static_cast<unsigned char>(c))) {
        ++pos_;
      } else if (c == ';') {
        while (pos_ < src_.size() && src_[pos_] != '\n') ++pos_;
      } else {
        break;
      }
    }
  }

  char peek() {
    if (pos_ >= src_.size()) err("unexpected end of input");
    return src_[pos_];
  }

  Value readDatum() {
    skipAtmosphere();
    char c = peek();
    if (c == '(') {
      ++pos_;
      return readListTail();
    }
    if (c == ')') err("unexpected ')'");
    if (c == '\'') {
      ++pos_;
      Value quoted = readDatum();
      return Value::cons(Value::symbol(interner_.intern("quote")),
                         Value::cons(quoted, Value::nil()));
    }
    if (c == '`' || c == ',')
      throw UnsupportedForm("quasiquotation is not supported");
    if (c == '"') return readString();
    if (c == '#') return readHash();
    return readAtom();
  }

  Value readListTail() {
    if (++depth_ > kMaxNesting) err("nesting too deep");
    std::vector<Value> items;
    Value tail = Value::nil();
    for (;;) {
      skipAtmosphere();
      char c = peek();
      if (c == ')') {
        ++pos_;
        break;
      }
      // A lone dot introduces the tail of an improper list.
      if (c == '.' && pos_ + 1 < src_.size() && isDelimiter(src_[pos_ + 1])) {
        if (items.empty()) err("dot at start of list");
        ++pos_;
        tail = readDatum();
        skipAtmosphere();
        if (peek() != ')') err("expected ')' after dotted tail");
        ++pos_;
        break;
      }
      items.push_back(readDatum());
    }
    Value list = tail;
    for (auto it = items.rbegin(); it != items.rend(); ++it)
      list = Value::cons(*it, list);
    --depth_;
    return list;
  }

  Value readString() {
    ++pos_;  // opening quote
    std::string out;
    for (;;) {
      if (pos_ >= src_.size()) err("unterminated string");
      char c = src_[pos_++];
      if (c == '"') break;
      if (c == '\\') {
        if (pos_ >= src_.size()) err("unterminated string escape");
        char e = src_[pos_++];
        switch (e) {
          case 'n': out += '\n'; break;
          case 't': out += '\t'; break;
          default: out += e; break;  // \" and \\ land here
        }
      } else {
        out += c;
      }
    }
    return Value::string(std::move(out));
  }

  Value readHash() {
    ++pos_;  // '#'
    if (pos_ >= src_.size()) err("unexpected end after '#'");
    char c = src_[pos_++];
    if (c == 't') return Value::boolean(true);
    if (c == 'f') return Value::boolean(false);
    if (c == '(') throw UnsupportedForm("vector literals are not supported");
    if (c == '\\') {
      // Character literal: #\x, #\space, #\newline.
      std::size_t start = pos_;
      if (pos_ >= src_.size()) err("unterminated character literal");
      ++pos_;
      while (pos_ < src_.size() && !isDelimiter(src_[pos_])) ++pos_;
      std::string_view name = src_.substr(start, pos_ - start);
      if (name.size() == 1) return Value::character(name[0]);
      if (name == "space") return Value::character(' ');
      if (name == "newline") return Value::character('\n');
      err("unknown character name '" + std::string(name) + "'");
    }
    err(std::string("unsupported '#") + c + "' syntax");
  }

  Value readAtom() {
    std::size_t start = pos_;
    while (pos_ < src_.size() && !isDelimiter(src_[pos_])) ++pos_;
    std::string_view tok = src_.substr(start, pos_ - start);
    if (tok.empty()) err("empty token");
    if (auto num = tryNumber(tok)) return *num;
    return Value::symbol(interner_.intern(tok));
  }

  std::optional<Value> tryNumber(std::string_view tok) {
    std::size_t i = (tok[0] == '+' || tok[0] == '-') ? 1 : 0;
    if (i == tok.size()) return std::nullopt;  // bare sign is a symbol
    bool digits = false, dot = false, exp = false;
    for (std::size_t j = i; j < tok.size(); ++j) {
      char c = tok[j];
      if (std::isdigit(static_cast<unsigned char>(c))) {
        digits = true;
      } else if (c == '.' && !dot && !exp) {
        dot = true;
      } else if ((c == 'e' || c == 'E') && digits && !exp) {
        exp = true;
        if (j + 1 < tok.size() && (tok[j + 1] == '+' || tok[j + 1] == '-')) ++j;
      } else {
        return std::nullopt;
      }
    }
    if (!digits) return std::nullopt;
    std::string_view body = tok[0] == '+' ? tok.substr(1) : tok;  // from_chars rejects '+'
    if (!dot && !exp) return Value::integer(Int(std::string(body)));
    double d = 0;
    auto res = std::from_chars(body.data(), body.data() + body.size(), d);
    if (res.ec != std::errc() || res.ptr != body.data() + body.size())
      err("malformed number '" + std::string(tok) + "'");
    return Value::real(d);
  }

  static constexpr std::size_t kMaxNesting = 2000;
  std::string_view src_;
  std::size_t pos_ = 0;
  std::size_t depth_ = 0;
  Interner interner_;
};

// Macro-defining forms are rejected at parse so the evaluator never sees
// them.  Iterative walk: parser depth limits don't bound total list length.
void rejectUnsupportedForms(const Value& root) {
  std::vector<const Value*> work{&root};
  while (!work.empty()) {
    const Value* v = work.back();
    work.pop_back();
    if (!v->isPair()) continue;
    const Value& head = v->asPair().car;
    if (head.isSymbol()) {
      const std::string& n = head.asSymbol().str();
      if (n == "define-syntax" || n == "let-syntax" || n == "letrec-syntax" ||
          n == "syntax-rules" || n == "delay")
        throw UnsupportedForm("'" + n + "' is not supported");
    }
    const Value* cur = v;
    while (cur->isPair()) {
      work.push_back(&cur->asPair().car);
      cur = &cur->asPair().cdr;
    }
  }
}

}  // namespace

ProgramAst parse(std::string_view source) {
  Reader reader(source);
  ProgramAst ast{reader.readAll()};
  for (const Value& form : ast.forms) rejectUnsupportedForms(form);
  return ast;
}

Value parse_datum(std::string_view source) {
  ProgramAst ast = parse(source);
  if (ast.forms.size() != 1)
    throw ParseError("expected exactly one datum, got " +
                     std::to_string(ast.forms.size()));
  return ast.forms[0];
}

}  // namespace ham::scheme
