#include "parl/config.hpp"

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include "parl/error.hpp"

namespace parl {

namespace pt = boost::property_tree;

namespace {

const std::map<std::string, std::set<std::string>>& known_keys() {
  static const std::map<std::string, std::set<std::string>> keys{
      {"env",
       {"rows", "cols", "start", "goal", "obstacles", "step_penalty", "goal_reward", "gamma",
        "max_episode_steps"}},
      {"buffer", {"capacity", "fanout", "alpha", "epsilon", "beta"}},
      {"threads", {"actors", "learners"}},
      {"train",
       {"steps", "batch_size", "update_interval", "learning_rate", "explore_epsilon", "seed",
        "lockstep", "metrics_every", "initial_q", "actor_lead"}},
      {"output", {"metrics", "summary"}},
  };
  return keys;
}

Cell parse_cell(const std::string& text) {
  std::stringstream ss(text);
  Cell c;
  char comma = 0;
  if (!(ss >> c.row >> comma >> c.col) || comma != ',' || !(ss >> std::ws).eof()) {
    throw ParameterError("bad cell '" + text + "' (expected row,col)");
  }
  return c;
}

std::vector<Cell> parse_cells(const std::string& text) {
  std::vector<Cell> cells;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ';')) {
    if (item.find_first_not_of(" \t") == std::string::npos) continue;
    cells.push_back(parse_cell(item));
  }
  return cells;
}

template <class T>
void read(const pt::ptree& tree, const char* key, T& target) {
  if (auto v = tree.get_optional<std::string>(key)) {
    try {
      target = tree.get<T>(key);
    } catch (const pt::ptree_bad_data&) {
      throw ParameterError(std::string("bad value for ") + key + ": '" + *v + "'");
    }
  }
}

}  // namespace

TrainFile parse_train_config(std::istream& in) {
  pt::ptree root;
  try {
    pt::read_ini(in, root);
  } catch (const pt::ini_parser_error& e) {
    throw ParameterError(std::string("config parse error: ") + e.what());
  }
  for (const auto& [section, body] : root) {
    auto it = known_keys().find(section);
    if (it == known_keys().end()) throw ParameterError("unknown config section [" + section + "]");
    if (body.empty()) throw ParameterError("config key '" + section + "' outside a section");
    for (const auto& [key, value] : body) {
      if (!it->second.contains(key)) {
        throw ParameterError("unknown config key '" + key + "' in [" + section + "]");
      }
    }
  }

  TrainFile file;
  TrainConfig& c = file.config;
  const pt::ptree empty;
  const auto& env = root.get_child("env", empty);
  read(env, "rows", c.env.rows);
  read(env, "cols", c.env.cols);
  if (auto s = env.get_optional<std::string>("start")) c.env.start = parse_cell(*s);
  if (auto g = env.get_optional<std::string>("goal")) c.env.goal = parse_cell(*g);
  if (auto o = env.get_optional<std::string>("obstacles")) c.env.obstacles = parse_cells(*o);
  read(env, "step_penalty", c.env.step_penalty);
  read(env, "goal_reward", c.env.goal_reward);
  read(env, "gamma", c.env.gamma);
  read(env, "max_episode_steps", c.env.max_episode_steps);

  const auto& buffer = root.get_child("buffer", empty);
  read(buffer, "capacity", c.buffer.capacity);
  read(buffer, "fanout", c.buffer.fanout);
  read(buffer, "alpha", c.buffer.alpha);
  read(buffer, "epsilon", c.buffer.epsilon_priority);
  read(buffer, "beta", c.buffer.beta);

  const auto& threads = root.get_child("threads", empty);
  read(threads, "actors", c.actors);
  read(threads, "learners", c.learners);

  const auto& train = root.get_child("train", empty);
  read(train, "steps", c.steps);
  read(train, "batch_size", c.batch_size);
  read(train, "update_interval", c.update_interval);
  read(train, "learning_rate", c.learning_rate);
  read(train, "explore_epsilon", c.explore_epsilon);
  read(train, "seed", c.seed);
  read(train, "lockstep", c.lockstep);
  read(train, "metrics_every", c.metrics_every);
  read(train, "initial_q", c.initial_q);
  read(train, "actor_lead", c.actor_lead);

  const auto& output = root.get_child("output", empty);
  read(output, "metrics", file.metrics_path);
  read(output, "summary", file.summary_path);

  validate(c);
  return file;
}

TrainFile load_train_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ParameterError("cannot open config file " + path.string());
  return parse_train_config(in);
}

}  // namespace parl
