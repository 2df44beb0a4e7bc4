#include "aisac/tensor_io.hpp"

#include <charconv>
#include <cstdio>
#include <fstream>
#include <functional>
#include <istream>
#include <numeric>
#include <ostream>
#include <sstream>

#include "aisac/common.hpp"

namespace aisac {

std::size_t Tensor::size() const {
  return std::accumulate(dims.begin(), dims.end(), std::size_t{1},
                         [](std::size_t acc, int d) { return acc * static_cast<std::size_t>(d); });
}

std::string format_double(double value) {
  char buffer[32];
  std::snprintf(buffer, sizeof(buffer), "%.17g", value);
  return buffer;
}

void write_tensor(std::ostream& out, const Tensor& tensor) {
  if (tensor.values.size() != tensor.size()) {
    throw ConfigError("write_tensor: '" + tensor.name + "' has inconsistent size");
  }
  out << "tensor " << tensor.name << ' ' << tensor.dims.size();
  for (int d : tensor.dims) out << ' ' << d;
  out << '\n';
  const std::size_t row = tensor.dims.empty() ? 1 : static_cast<std::size_t>(tensor.dims.back());
  for (std::size_t i = 0; i < tensor.values.size(); ++i) {
    out << format_double(tensor.values[i]);
    out << ((row == 0 || (i + 1) % row == 0) ? '\n' : ' ');
  }
}

namespace {

bool next_content_line(std::istream& in, std::string& line, int& line_no) {
  while (std::getline(in, line)) {
    ++line_no;
    const auto first = line.find_first_not_of(" \t\r");
    if (first == std::string::npos || line[first] == '#') continue;
    return true;
  }
  return false;
}

double parse_value(const std::string& token, int line_no) {
  double value = 0.0;
  const char* begin = token.data();
  const char* end = begin + token.size();
  auto [ptr, ec] = std::from_chars(begin, end, value);
  if (ec != std::errc() || ptr != end) {
    // from_chars rejects "inf"/"nan" spellings on some libstdc++ versions
    std::istringstream fallback(token);
    if (!(fallback >> value)) {
      throw ConfigError("tensor file line " + std::to_string(line_no) + ": bad value '" + token + "'");
    }
  }
  return value;
}

}  // namespace

std::vector<Tensor> read_tensors(std::istream& in) {
  std::vector<Tensor> tensors;
  std::string line;
  int line_no = 0;
  while (next_content_line(in, line, line_no)) {
    std::istringstream header(line);
    std::string keyword;
    Tensor tensor;
    int rank = -1;
    header >> keyword >> tensor.name >> rank;
    if (keyword != "tensor" || tensor.name.empty() || rank < 0 || header.fail()) {
      throw ConfigError("tensor file line " + std::to_string(line_no) + ": expected 'tensor <name> <rank> <dims...>'");
    }
    for (int i = 0; i < rank; ++i) {
      int d = -1;
      if (!(header >> d) || d < 0) {
        throw ConfigError("tensor file line " + std::to_string(line_no) + ": bad dimension");
      }
      tensor.dims.push_back(d);
    }
    const std::size_t total = tensor.size();
    tensor.values.reserve(total);
    while (tensor.values.size() < total) {
      if (!next_content_line(in, line, line_no)) {
        throw ConfigError("tensor '" + tensor.name + "': unexpected end of file");
      }
      std::istringstream row(line);
      std::string token;
      while (row >> token) tensor.values.push_back(parse_value(token, line_no));
      if (tensor.values.size() > total) {
        throw ConfigError("tensor '" + tensor.name + "': too many values at line " + std::to_string(line_no));
      }
    }
    tensors.push_back(std::move(tensor));
  }
  return tensors;
}

std::map<std::string, Tensor> read_tensor_map(std::istream& in) {
  std::map<std::string, Tensor> out;
  for (auto& t : read_tensors(in)) {
    const std::string name = t.name;
    if (!out.emplace(name, std::move(t)).second) throw ConfigError("duplicate tensor '" + name + "'");
  }
  return out;
}

std::map<std::string, Tensor> load_tensor_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open tensor file: " + path);
  return read_tensor_map(in);
}

void save_tensor_file(const std::string& path, const std::vector<Tensor>& tensors) {
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot write tensor file: " + path);
  for (const auto& t : tensors) write_tensor(out, t);
}

const Tensor& require_tensor(const std::map<std::string, Tensor>& tensors, const std::string& name,
                             const std::vector<int>& dims) {
  auto it = tensors.find(name);
  if (it == tensors.end()) throw ConfigError("missing tensor '" + name + "'");
  if (it->second.dims != dims) throw ConfigError("tensor '" + name + "' has unexpected shape");
  return it->second;
}

}  // namespace aisac
