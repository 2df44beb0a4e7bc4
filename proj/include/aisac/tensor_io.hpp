#pragma once

// Plain-text tensor format used for MDP fixtures and checkpoints.
//
//   tensor <name> <rank> <dim_0> ... <dim_{rank-1}>
//   <values of the last dimension, one row per line>
//
// Lines starting with '#' and blank lines are ignored. Values are written with
// 17 significant digits so a save/load cycle is exact.

#include <iosfwd>
#include <map>
#include <string>
#include <vector>

namespace aisac {

struct Tensor {
  std::string name;
  std::vector<int> dims;
  std::vector<double> values;  // row-major

  std::size_t size() const;
};

void write_tensor(std::ostream& out, const Tensor& tensor);
std::vector<Tensor> read_tensors(std::istream& in);

// Name-indexed view of a tensor file; throws ConfigError on duplicates.
std::map<std::string, Tensor> read_tensor_map(std::istream& in);
std::map<std::string, Tensor> load_tensor_file(const std::string& path);
void save_tensor_file(const std::string& path, const std::vector<Tensor>& tensors);

// Fetches a tensor and checks its shape; throws ConfigError otherwise.
const Tensor& require_tensor(const std::map<std::string, Tensor>& tensors, const std::string& name,
                             const std::vector<int>& dims);

std::string format_double(double value);

}  // namespace aisac
