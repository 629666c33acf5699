#include "ccf/checkpoint.hpp"

#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

namespace ccf {

namespace {

void print_real(std::ostream& out, double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  out << buf;
}

std::vector<std::string> tokenize(const std::string& line) {
  std::vector<std::string> tokens;
  std::istringstream in(line);
  std::string tok;
  while (in >> tok) {
    tokens.push_back(tok);
  }
  return tokens;
}

double parse_real(const std::string& token, std::size_t line_no) {
  char* end = nullptr;
  const double v = std::strtod(token.c_str(), &end);
  if (end == token.c_str() || *end != '\0') {
    throw DataError("checkpoint line " + std::to_string(line_no) + ": bad real '" + token + "'");
  }
  return v;
}

}  // namespace

void Checkpoint::save(std::ostream& out, const ParameterStore& store) {
  out << "ccf-model v1 dim=" << store.dim() << " hash_bits=";
  if (store.hashing_enabled()) {
    out << store.hash_bits();
  } else {
    out << "none";
  }
  out << '\n';
  for (const auto& u : store.users()) {
    out << "U " << u;
    for (const double v : store.user_vector(u)) {
      out << ' ';
      print_real(out, v);
    }
    out << '\n';
  }
  for (const auto& i : store.items()) {
    out << "I " << i;
    for (const double v : store.item_vector(i)) {
      out << ' ';
      print_real(out, v);
    }
    out << '\n';
  }
  if (store.thresholds_enabled()) {
    for (const auto& u : store.users()) {
      out << "T " << u << ' ';
      print_real(out, store.threshold(u));
      out << '\n';
    }
  }
  if (store.has_content_matrix()) {
    for (int row = 0; row < store.content_rows(); ++row) {
      out << "M " << row;
      for (int col = 0; col < store.content_cols(); ++col) {
        out << ' ';
        print_real(out, store.content_at(row, col));
      }
      out << '\n';
    }
  }
}

void Checkpoint::save(const std::filesystem::path& path, const ParameterStore& store) {
  std::ofstream out(path);
  if (!out) {
    throw DataError("cannot write checkpoint '" + path.string() + "'");
  }
  save(out, store);
}

ParameterStore Checkpoint::load(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) {
    throw DataError("checkpoint: empty input");
  }
  int dim = 0;
  char hash_field[16] = {0};
  if (std::sscanf(line.c_str(), "ccf-model v1 dim=%d hash_bits=%15s", &dim, hash_field) != 2 ||
      dim < 1) {
    throw DataError("checkpoint: bad header '" + line + "'");
  }

  ParameterStore store;
  store.dim_ = dim;
  const std::string hash_token(hash_field);
  if (hash_token != "none") {
    const int bits = static_cast<int>(parse_real(hash_token, 1));
    if (bits < 1 || bits > 40) {
      throw DataError("checkpoint: hash_bits out of range");
    }
    store.hash_bits_ = bits;
    store.hash_table_.assign(std::size_t{1} << bits, 0.0);
  }

  std::vector<std::vector<double>> content_rows;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    const auto tokens = tokenize(line);
    if (tokens.empty()) {
      continue;
    }
    const std::string& tag = tokens.front();
    if (tag == "U" || tag == "I") {
      if (tokens.size() != static_cast<std::size_t>(dim) + 2) {
        throw ShapeError("checkpoint line " + std::to_string(line_no) + ": expected " +
                         std::to_string(dim) + " factor values");
      }
      std::vector<double> vec(dim);
      for (int c = 0; c < dim; ++c) {
        vec[c] = parse_real(tokens[2 + c], line_no);
      }
      if (tag == "U") {
        store.set_user_vector(tokens[1], vec);
      } else {
        store.set_item_vector(tokens[1], vec);
      }
    } else if (tag == "T") {
      if (tokens.size() != 3) {
        throw ShapeError("checkpoint line " + std::to_string(line_no) +
                         ": expected 'T <id> <real>'");
      }
      store.set_threshold(tokens[1], parse_real(tokens[2], line_no));
    } else if (tag == "M") {
      if (tokens.size() < 3) {
        throw ShapeError("checkpoint line " + std::to_string(line_no) +
                         ": expected 'M <row> <reals>'");
      }
      const auto row = static_cast<std::size_t>(parse_real(tokens[1], line_no));
      if (row != content_rows.size()) {
        throw DataError("checkpoint line " + std::to_string(line_no) +
                        ": content matrix rows out of order");
      }
      std::vector<double> vals;
      for (std::size_t j = 2; j < tokens.size(); ++j) {
        vals.push_back(parse_real(tokens[j], line_no));
      }
      if (!content_rows.empty() && vals.size() != content_rows.front().size()) {
        throw ShapeError("checkpoint line " + std::to_string(line_no) +
                         ": ragged content matrix");
      }
      content_rows.push_back(std::move(vals));
    } else {
      throw DataError("checkpoint line " + std::to_string(line_no) + ": unknown tag '" + tag +
                      "'");
    }
  }
  if (!content_rows.empty()) {
    std::vector<double> flat;
    for (const auto& row : content_rows) {
      flat.insert(flat.end(), row.begin(), row.end());
    }
    store.set_content_matrix(static_cast<int>(content_rows.size()),
                             static_cast<int>(content_rows.front().size()), flat);
  }
  return store;
}

ParameterStore Checkpoint::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) {
    throw DataError("cannot open checkpoint '" + path.string() + "'");
  }
  return load(in);
}

}  // namespace ccf
