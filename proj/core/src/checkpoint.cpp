#include "lipspline/checkpoint.hpp"

#include <cstdio>
#include <cstdlib>
#include <sstream>

#include "lipspline/error.hpp"
#include "lipspline/io.hpp"

namespace lipspline {

namespace {

constexpr const char* kMagic = "lipspline-checkpoint 1";

std::string hex(double v) {
  char buf[48];
  std::snprintf(buf, sizeof buf, "%a", v);
  return buf;
}

double unhex(const std::string& s) {
  char* end = nullptr;
  const double v = std::strtod(s.c_str(), &end);
  if (end == s.c_str() || *end != '\0') throw ConfigError("checkpoint: bad number '" + s + "'");
  return v;
}

void write_tensor(std::ostringstream& os, const std::string& tag, const std::string& name, const Tensor& t) {
  os << tag << ' ' << name << ' ' << t.rank();
  for (auto d : t.shape()) os << ' ' << d;
  os << '\n';
  for (std::size_t i = 0; i < t.size(); ++i) os << (i ? " " : "") << hex(t[i]);
  os << '\n';
}

Tensor read_tensor(std::istringstream& header, std::istream& in) {
  std::size_t rank = 0;
  if (!(header >> rank)) throw ConfigError("checkpoint: missing tensor rank");
  Shape shape(rank);
  for (auto& d : shape) {
    if (!(header >> d)) throw ConfigError("checkpoint: missing tensor dimension");
  }
  std::string line;
  if (!std::getline(in, line)) throw ConfigError("checkpoint: missing tensor values");
  std::istringstream vals(line);
  std::vector<double> data;
  std::string tok;
  while (vals >> tok) data.push_back(unhex(tok));
  if (rank == 0) {
    if (!data.empty()) throw ConfigError("checkpoint: values for an empty tensor");
    return Tensor();
  }
  return Tensor(std::move(shape), std::move(data));
}

}  // namespace

std::string serialize_checkpoint(const Network& net, const CheckpointMeta& meta) {
  const NetworkSpec& s = net.spec();
  const ActivationSpec& a = s.activation;
  std::ostringstream os;
  os << kMagic << '\n';
  os << "spec layer_kind " << to_string(s.layer_kind) << '\n';
  os << "spec widths";
  for (auto w : s.widths) os << ' ' << w;
  os << '\n';
  os << "spec constraint " << to_string(s.constraint) << '\n';
  os << "spec init " << to_string(s.init) << '\n';
  os << "spec kernel_size " << s.kernel_size << '\n';
  os << "spec bias " << (s.bias ? 1 : 0) << '\n';
  os << "spec bjorck_iters " << s.bjorck_iters << '\n';
  os << "spec image_size " << s.image_size << '\n';
  os << "spec seed " << s.seed << '\n';
  os << "spec activation " << to_string(a.kind) << '\n';
  os << "spec group_size " << a.group_size << '\n';
  os << "spec shared " << (a.shared ? 1 : 0) << '\n';
  os << "spec spline_init " << to_string(a.spline_init) << '\n';
  os << "spec spline_size " << a.spline_size << '\n';
  os << "spec spline_range " << hex(a.spline_range) << '\n';
  os << "spec leaky_slope " << hex(a.leaky_slope) << '\n';
  os << "spec prelu_init " << hex(a.prelu_init) << '\n';
  for (const auto& [k, v] : meta) {
    if (k.find_first_of(" \n") != std::string::npos || v.find('\n') != std::string::npos) {
      throw ConfigError("checkpoint: metadata keys may not contain spaces and values may not contain newlines");
    }
    os << "meta " << k << ' ' << v << '\n';
  }
  for (const auto& [name, t] : net.parameters()) write_tensor(os, "tensor", name, t);
  const auto& state = net.power_state();
  for (std::size_t l = 0; l < state.size(); ++l) write_tensor(os, "state", std::to_string(l), state[l]);
  os << "end\n";
  return os.str();
}

Network deserialize_checkpoint(const std::string& text, CheckpointMeta* meta) {
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line) || line != kMagic) throw ConfigError("checkpoint: unrecognized header");
  NetworkSpec s;
  std::map<std::string, Tensor> params;
  std::map<std::size_t, Tensor> state;
  bool ended = false;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::istringstream row(line);
    std::string tag;
    row >> tag;
    if (tag == "end") {
      ended = true;
      break;
    }
    if (tag == "spec") {
      std::string key;
      row >> key;
      auto word = [&] {
        std::string w;
        if (!(row >> w)) throw ConfigError("checkpoint: spec '" + key + "' has no value");
        return w;
      };
      auto size = [&] { return static_cast<std::size_t>(std::stoull(word())); };
      auto& a = s.activation;
      if (key == "layer_kind") s.layer_kind = parse_layer_kind(word());
      else if (key == "widths") {
        std::size_t w = 0;
        while (row >> w) s.widths.push_back(w);
      } else if (key == "constraint") s.constraint = parse_constraint(word());
      else if (key == "init") s.init = parse_init_scheme(word());
      else if (key == "kernel_size") s.kernel_size = size();
      else if (key == "bias") s.bias = size() != 0;
      else if (key == "bjorck_iters") s.bjorck_iters = static_cast<int>(size());
      else if (key == "image_size") s.image_size = size();
      else if (key == "seed") s.seed = std::stoull(word());
      else if (key == "activation") a.kind = parse_activation(word());
      else if (key == "group_size") a.group_size = size();
      else if (key == "shared") a.shared = size() != 0;
      else if (key == "spline_init") a.spline_init = parse_spline_init(word());
      else if (key == "spline_size") a.spline_size = size();
      else if (key == "spline_range") a.spline_range = unhex(word());
      else if (key == "leaky_slope") a.leaky_slope = unhex(word());
      else if (key == "prelu_init") a.prelu_init = unhex(word());
      else throw ConfigError("checkpoint: unknown spec key '" + key + "'");
    } else if (tag == "meta") {
      std::string key, value;
      row >> key;
      std::getline(row >> std::ws, value);
      if (meta) (*meta)[key] = value;
    } else if (tag == "tensor") {
      std::string name;
      row >> name;
      params[name] = read_tensor(row, in);
    } else if (tag == "state") {
      std::size_t layer = 0;
      row >> layer;
      state[layer] = read_tensor(row, in);
    } else {
      throw ConfigError("checkpoint: unknown record '" + tag + "'");
    }
  }
  if (!ended) throw ConfigError("checkpoint: truncated archive");

  Network net(s);
  if (params.size() != net.parameters().size()) throw ConfigError("checkpoint: parameter set does not match spec");
  for (auto& [name, t] : params) net.set_parameter(name, std::move(t));
  for (auto& [layer, v] : state) {
    if (!v.empty()) net.set_power_state(layer, std::move(v));
  }
  return net;
}

void save_checkpoint(const std::filesystem::path& path, const Network& net, const CheckpointMeta& meta) {
  write_file_atomic(path, serialize_checkpoint(net, meta));
}

Network load_checkpoint(const std::filesystem::path& path, CheckpointMeta* meta) {
  return deserialize_checkpoint(read_file(path), meta);
}

}  // namespace lipspline
