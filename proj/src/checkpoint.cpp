#include "dg/checkpoint.hpp"

#include <fstream>
#include <stdexcept>
#include <vector>

#include "json.hpp"

#include "dg/rng.hpp"
#include "dg/tensor.hpp"

namespace dg {
namespace {

using nlohmann::json;

void write_param(std::ostream& os, const std::vector<float>& data,
                 std::vector<std::size_t> shape) {
  write_dtns(os, Tensor(std::move(shape), data));
}

Tensor read_param(std::istream& is, const std::vector<std::size_t>& want) {
  Tensor t = read_dtns(is);
  if (t.shape() != want) throw std::runtime_error("parameter shape mismatch");
  return t;
}

json schedule_header(const NoiseSchedule& s) {
  return {{"kind", to_string(s.kind)},
          {"T", s.T},
          {"beta_start", s.beta_start},
          {"beta_end", s.beta_end},
          {"s", s.s_offset}};
}

NoiseSchedule schedule_from_header(const json& j) {
  const ScheduleKind kind = schedule_kind_from_string(j.at("kind").get<std::string>());
  const int T = j.at("T").get<int>();
  if (kind == ScheduleKind::linear)
    return build_linear(T, j.at("beta_start").get<double>(), j.at("beta_end").get<double>());
  return build_cosine(T, j.at("s").get<double>());
}

json parse_header(std::istream& is, const std::string& expected_kind) {
  std::string line;
  if (!std::getline(is, line)) throw std::runtime_error("missing checkpoint header");
  json j = json::parse(line);
  if (j.at("kind").get<std::string>() != expected_kind)
    throw std::runtime_error("checkpoint kind is '" + j.at("kind").get<std::string>() +
                             "', expected '" + expected_kind + "'");
  return j;
}

std::vector<int> hidden_widths(const DenseStack& stack) {
  std::vector<int> widths = stack.widths();
  return {widths.begin() + 1, widths.end() - 1};
}

void write_stack(std::ostream& os, const DenseStack& stack) {
  for (const DenseLayer& l : stack.layers) {
    write_param(os, l.w, {static_cast<std::size_t>(l.out), static_cast<std::size_t>(l.in)});
    write_param(os, l.b, {static_cast<std::size_t>(l.out)});
  }
}

void read_stack(std::istream& is, DenseStack& stack) {
  for (DenseLayer& l : stack.layers) {
    l.w = read_param(is, {static_cast<std::size_t>(l.out), static_cast<std::size_t>(l.in)})
              .values();
    l.b = read_param(is, {static_cast<std::size_t>(l.out)}).values();
  }
}

}  // namespace

void save_denoiser(const std::string& path, const MlpDenoiser& m) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error(path + ": cannot open for writing");
  json header = {{"kind", "mlp_denoiser"},
                 {"data_dim", m.dim()},
                 {"hidden", hidden_widths(m.stack)},
                 {"time_dim", MlpDenoiser::kTimeDim},
                 {"num_classes", m.num_classes()},
                 {"init_seed", m.init_seed()},
                 {"schedule", schedule_header(m.schedule())}};
  os << header.dump() << '\n';
  write_stack(os, m.stack);
  if (m.num_classes() > 0)
    write_param(os, m.label_table,
                {static_cast<std::size_t>(m.num_classes() + 1), MlpDenoiser::kTimeDim});
  if (!os) throw std::runtime_error(path + ": write failed");
}

MlpDenoiser load_denoiser(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error(path + ": cannot open");
  try {
    json j = parse_header(is, "mlp_denoiser");
    MlpDenoiser m(j.at("data_dim").get<int>(), schedule_from_header(j.at("schedule")),
                  j.at("init_seed").get<std::uint64_t>(),
                  j.at("hidden").get<std::vector<int>>());
    if (j.at("time_dim").get<int>() != MlpDenoiser::kTimeDim)
      throw std::runtime_error("unsupported time embedding width");
    read_stack(is, m.stack);
    const int num_classes = j.at("num_classes").get<int>();
    if (num_classes > 0) {
      m.attach_label_table(num_classes, 0);
      m.label_table = read_param(is, {static_cast<std::size_t>(num_classes + 1),
                                      MlpDenoiser::kTimeDim})
                          .values();
    }
    return m;
  } catch (const json::exception& e) {
    throw std::runtime_error(path + ": bad checkpoint header: " + e.what());
  } catch (const std::runtime_error& e) {
    throw std::runtime_error(path + ": " + e.what());
  }
}

void save_classifier(const std::string& path, const GuidanceClassifier& clf) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error(path + ": cannot open for writing");
  json header = {{"kind", "guidance_classifier"},
                 {"input", to_string(clf.input)},
                 {"t_feats", clf.t_feats},
                 {"taps", clf.taps},
                 {"noising", to_string(clf.train_noising)},
                 {"num_classes", clf.num_classes},
                 {"cells", clf.cells},
                 {"widths", clf.head.widths()}};
  os << header.dump() << '\n';
  write_stack(os, clf.head);
  if (!os) throw std::runtime_error(path + ": write failed");
}

GuidanceClassifier load_classifier(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error(path + ": cannot open");
  try {
    json j = parse_header(is, "guidance_classifier");
    GuidanceClassifier clf;
    clf.input = guidance_input_from_string(j.at("input").get<std::string>());
    clf.t_feats = j.at("t_feats").get<std::vector<int>>();
    clf.taps = j.at("taps").get<std::vector<int>>();
    clf.train_noising = noising_mode_from_string(j.at("noising").get<std::string>());
    clf.num_classes = j.at("num_classes").get<int>();
    clf.cells = j.at("cells").get<int>();
    const auto widths = j.at("widths").get<std::vector<int>>();
    if (widths.size() < 2) throw std::runtime_error("classifier needs at least one layer");
    clf.head.layers.resize(widths.size() - 1);
    for (std::size_t l = 0; l + 1 < widths.size(); ++l) {
      clf.head.layers[l].in = widths[l];
      clf.head.layers[l].out = widths[l + 1];
    }
    read_stack(is, clf.head);
    return clf;
  } catch (const json::exception& e) {
    throw std::runtime_error(path + ": bad checkpoint header: " + e.what());
  } catch (const std::runtime_error& e) {
    throw std::runtime_error(path + ": " + e.what());
  }
}

}  // namespace dg
