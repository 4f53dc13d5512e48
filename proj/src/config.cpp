#include "csac/config.hpp"

#include <charconv>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "csac/errors.hpp"

namespace csac {

namespace {

std::string trim(const std::string& s) {
  const auto a = s.find_first_not_of(" \t\r\n");
  if (a == std::string::npos) return "";
  const auto b = s.find_last_not_of(" \t\r\n");
  return s.substr(a, b - a + 1);
}

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::string item;
  std::istringstream ss(s);
  while (std::getline(ss, item, sep)) {
    item = trim(item);
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

double to_double(const std::string& key, const std::string& v) {
  double d = 0.0;
  const auto r = std::from_chars(v.data(), v.data() + v.size(), d);
  if (r.ec != std::errc() || r.ptr != v.data() + v.size()) {
    throw ValidationError("config: '" + key + "' expects a number, got '" + v + "'");
  }
  return d;
}

std::uint64_t to_uint(const std::string& key, const std::string& v) {
  std::uint64_t n = 0;
  const auto r = std::from_chars(v.data(), v.data() + v.size(), n);
  if (r.ec != std::errc() || r.ptr != v.data() + v.size()) {
    throw ValidationError("config: '" + key + "' expects a non-negative integer, got '" + v + "'");
  }
  return n;
}

bool to_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1" || v == "yes") return true;
  if (v == "false" || v == "0" || v == "no") return false;
  throw ValidationError("config: '" + key + "' expects true or false, got '" + v + "'");
}

std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

template <typename T, typename F>
std::string join(const std::vector<T>& v, F f) {
  std::string s;
  for (std::size_t k = 0; k < v.size(); ++k) s += (k ? "," : "") + f(v[k]);
  return s;
}

}  // namespace

void ExperimentConfig::set(const std::string& key, const std::string& raw) {
  const std::string v = trim(raw);
  if (key == "env") env = v;
  else if (key == "algo") algo = v;
  else if (key == "sigma") agent.sigma = to_double(key, v);
  else if (key == "tau") agent.tau = to_double(key, v);
  else if (key == "gamma") agent.gamma = to_double(key, v);
  else if (key == "rho") agent.rho = to_double(key, v);
  else if (key == "actor_lr") agent.actor_lr = to_double(key, v);
  else if (key == "critic_lr") agent.critic_lr = to_double(key, v);
  else if (key == "log_std_min") agent.log_std_min = to_double(key, v);
  else if (key == "log_std_max") agent.log_std_max = to_double(key, v);
  else if (key == "kl_through_action") agent.kl_through_action = to_bool(key, v);
  else if (key == "hidden") {
    agent.hidden.clear();
    for (const auto& h : split(v, ',')) agent.hidden.push_back(to_uint(key, h));
  } else if (key == "batch_size") batch_size = to_uint(key, v);
  else if (key == "buffer_capacity") buffer_capacity = to_uint(key, v);
  else if (key == "warmup_steps") warmup_steps = to_uint(key, v);
  else if (key == "total_steps") total_steps = to_uint(key, v);
  else if (key == "eval_interval") eval_interval = to_uint(key, v);
  else if (key == "eval_episodes") eval_episodes = to_uint(key, v);
  else if (key == "max_episode_steps") max_episode_steps = to_uint(key, v);
  else if (key == "seeds") {
    seeds.clear();
    for (const auto& s : split(v, ',')) seeds.push_back(to_uint(key, s));
  } else if (key == "perturbation") {
    perturbation.clear();
    for (const auto& item : split(v, ',')) {
      const auto colon = item.find(':');
      if (colon == std::string::npos) {
        throw ValidationError("config: perturbation entries are step:multiplier, got '" + item + "'");
      }
      perturbation.push_back({to_uint(key, trim(item.substr(0, colon))),
                              to_double(key, trim(item.substr(colon + 1)))});
    }
  } else if (key == "tau_list") {
    tau_list.clear();
    for (const auto& t : split(v, ',')) tau_list.push_back(to_double(key, t));
  } else if (key == "threshold") threshold = to_double(key, v);
  else if (key == "out_dir") out_dir = v;
  else if (key == "checkpoint_interval") checkpoint_interval = to_uint(key, v);
  else if (key == "wall_clock") wall_clock = to_bool(key, v);
  else if (key == "threads") threads = static_cast<int>(to_uint(key, v));
  else if (key == "workers") workers = static_cast<int>(to_uint(key, v));
  else throw ValidationError("config: unknown key '" + key + "'");
}

void ExperimentConfig::apply_override(const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos) {
    throw ValidationError("override '" + assignment + "' is not of the form key=value");
  }
  set(trim(assignment.substr(0, eq)), assignment.substr(eq + 1));
}

void ExperimentConfig::validate() const {
  if (env != "pendulum" && env != "reacher") {
    throw ValidationError("config: env must be pendulum or reacher, got '" + env + "'");
  }
  if (algo != "csac" && algo != "sac") {
    throw ValidationError("config: algo must be csac or sac, got '" + algo + "'");
  }
  agent.validate();
  if (batch_size == 0) throw ValidationError("config: batch_size must be positive");
  if (buffer_capacity < batch_size) {
    throw ValidationError("config: buffer_capacity must be at least batch_size");
  }
  if (eval_interval == 0) throw ValidationError("config: eval_interval must be positive");
  if (eval_episodes == 0) throw ValidationError("config: eval_episodes must be positive");
  if (seeds.empty()) throw ValidationError("config: at least one seed is required");
  for (const auto& p : perturbation) {
    if (!(p.multiplier > 0.0)) throw ValidationError("config: perturbation multipliers must be positive");
    if (p.step > total_steps) {
      throw ValidationError("config: perturbation step " + std::to_string(p.step) +
                            " is beyond total_steps");
    }
  }
  for (double t : tau_list) {
    if (!(t >= 0.0) || !(t + agent.sigma > 0.0)) {
      throw ValidationError("config: tau_list entries must be >= 0 with sigma + tau > 0");
    }
  }
  if (threads < 1 || workers < 1) throw ValidationError("config: threads and workers must be >= 1");
}

std::string ExperimentConfig::to_text() const {
  std::ostringstream o;
  auto u = [](std::uint64_t x) { return std::to_string(x); };
  o << "env = " << env << '\n'
    << "algo = " << algo << '\n'
    << "sigma = " << fmt(agent.sigma) << '\n'
    << "tau = " << fmt(agent.tau) << '\n'
    << "gamma = " << fmt(agent.gamma) << '\n'
    << "rho = " << fmt(agent.rho) << '\n'
    << "actor_lr = " << fmt(agent.actor_lr) << '\n'
    << "critic_lr = " << fmt(agent.critic_lr) << '\n'
    << "log_std_min = " << fmt(agent.log_std_min) << '\n'
    << "log_std_max = " << fmt(agent.log_std_max) << '\n'
    << "kl_through_action = " << (agent.kl_through_action ? "true" : "false") << '\n'
    << "hidden = " << join(agent.hidden, u) << '\n'
    << "batch_size = " << batch_size << '\n'
    << "buffer_capacity = " << buffer_capacity << '\n'
    << "warmup_steps = " << warmup_steps << '\n'
    << "total_steps = " << total_steps << '\n'
    << "eval_interval = " << eval_interval << '\n'
    << "eval_episodes = " << eval_episodes << '\n'
    << "max_episode_steps = " << max_episode_steps << '\n'
    << "seeds = " << join(seeds, u) << '\n'
    << "perturbation = "
    << join(perturbation, [](const Perturbation& p) { return std::to_string(p.step) + ":" + fmt(p.multiplier); })
    << '\n'
    << "tau_list = " << join(tau_list, fmt) << '\n'
    << "threshold = " << fmt(threshold) << '\n'
    << "out_dir = " << out_dir << '\n'
    << "checkpoint_interval = " << checkpoint_interval << '\n'
    << "wall_clock = " << (wall_clock ? "true" : "false") << '\n'
    << "threads = " << threads << '\n'
    << "workers = " << workers << '\n';
  return o.str();
}

ExperimentConfig parse_config(const std::string& text) {
  ExperimentConfig cfg;
  std::istringstream in(text);
  std::size_t line_no = 0;
  for (std::string line; std::getline(in, line);) {
    ++line_no;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.resize(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw ValidationError("config line " + std::to_string(line_no) + ": expected key = value");
    }
    try {
      cfg.set(trim(line.substr(0, eq)), line.substr(eq + 1));
    } catch (const ValidationError& e) {
      throw ValidationError("config line " + std::to_string(line_no) + ": " + e.what());
    }
  }
  return cfg;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot read config " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str());
}

}  // namespace csac
