#include "encoder.hpp"

#include <algorithm>

#include "errors.hpp"

namespace cpcseq::model {

EncoderFamily encoder_family_from_string(const std::string& s) {
  if (s == "fully_connected") return EncoderFamily::FullyConnected;
  if (s == "conv1d") return EncoderFamily::Conv1d;
  if (s == "recurrent") return EncoderFamily::Recurrent;
  throw UsageError("unknown encoder family '" + s + "'");
}

std::string to_string(EncoderFamily f) {
  switch (f) {
    case EncoderFamily::FullyConnected: return "fully_connected";
    case EncoderFamily::Conv1d: return "conv1d";
    case EncoderFamily::Recurrent: return "recurrent";
  }
  return "?";
}

RnnCell rnn_cell_from_string(const std::string& s) {
  if (s == "lstm") return RnnCell::Lstm;
  if (s == "gru") return RnnCell::Gru;
  throw UsageError("unknown recurrent cell '" + s + "'");
}

std::string to_string(RnnCell c) { return c == RnnCell::Lstm ? "lstm" : "gru"; }

void EncoderSpec::validate() const {
  if (family != EncoderFamily::Recurrent) {
    if (layer_widths.empty()) throw UsageError("encoder needs at least one layer width");
    for (int w : layer_widths)
      if (w < 1) throw UsageError("encoder layer widths must be positive");
  }
  if (family == EncoderFamily::Conv1d) {
    if (kernel_size < 1 || kernel_size % 2 == 0)
      throw UsageError("conv1d kernel size must be odd and positive");
  }
  if (family == EncoderFamily::Recurrent && hidden < 1)
    throw UsageError("recurrent hidden size must be positive");
  if (dropout_p < 0.0 || dropout_p >= 1.0) throw UsageError("dropout_p must lie in [0, 1)");
}

nlohmann::json EncoderSpec::to_json() const {
  nlohmann::json j;
  j["family"] = model::to_string(family);
  j["layer_widths"] = layer_widths;
  j["kernel_size"] = kernel_size;
  j["cell"] = model::to_string(cell);
  j["hidden"] = hidden;
  j["dropout_p"] = dropout_p;
  return j;
}

EncoderSpec EncoderSpec::from_json(const nlohmann::json& j) {
  EncoderSpec s;
  if (j.contains("family")) s.family = encoder_family_from_string(j.at("family").get<std::string>());
  if (j.contains("layer_widths")) s.layer_widths = j.at("layer_widths").get<std::vector<int>>();
  if (j.contains("kernel_size")) s.kernel_size = j.at("kernel_size").get<int>();
  if (j.contains("cell")) s.cell = rnn_cell_from_string(j.at("cell").get<std::string>());
  if (j.contains("hidden")) s.hidden = j.at("hidden").get<int>();
  if (j.contains("dropout_p")) s.dropout_p = j.at("dropout_p").get<double>();
  s.validate();
  return s;
}

int receptive_field(const EncoderSpec& spec) {
  switch (spec.family) {
    case EncoderFamily::FullyConnected: return 1;
    case EncoderFamily::Conv1d: return 1 + spec.num_layers() * (spec.kernel_size - 1);
    case EncoderFamily::Recurrent: return kUnboundedCausal;
  }
  return kUnboundedCausal;
}

Encoder Encoder::make(const EncoderSpec& spec, int in_channels, Rng& rng) {
  spec.validate();
  Encoder e;
  e.spec = spec;
  e.in_channels = in_channels;
  switch (spec.family) {
    case EncoderFamily::FullyConnected: {
      int in = in_channels;
      for (std::size_t i = 0; i < spec.layer_widths.size(); ++i) {
        e.fc.push_back(
            nn::Linear::make("enc.layer" + std::to_string(i), in, spec.layer_widths[i], rng));
        in = spec.layer_widths[i];
      }
      break;
    }
    case EncoderFamily::Conv1d: {
      int in = in_channels;
      for (std::size_t i = 0; i < spec.layer_widths.size(); ++i) {
        e.conv.push_back(nn::Conv1d::make("enc.layer" + std::to_string(i), in,
                                          spec.layer_widths[i], spec.kernel_size, rng));
        in = spec.layer_widths[i];
      }
      break;
    }
    case EncoderFamily::Recurrent: {
      if (spec.cell == RnnCell::Gru)
        e.rnn_gru = nn::GruLayer::make("enc.layer0", in_channels, spec.hidden, rng);
      else
        e.rnn_lstm = nn::LstmLayer::make("enc.layer0", in_channels, spec.hidden, rng);
      break;
    }
  }
  return e;
}

std::vector<Var> Encoder::forward(Tape& t, Var stacked, int batch, int len, bool train, Rng* rng,
                                  int frozen_layers) {
  if (len < 1) throw DataError("encoder: empty window");
  std::vector<Var> steps;
  steps.reserve(static_cast<std::size_t>(len));

  auto split_steps = [&](Var flat) {
    std::vector<Var> out;
    out.reserve(static_cast<std::size_t>(len));
    for (int s = 0; s < len; ++s) {
      std::vector<int> idx(static_cast<std::size_t>(batch));
      for (int b = 0; b < batch; ++b) idx[static_cast<std::size_t>(b)] = b * len + s;
      out.push_back(t.gather_rows(flat, std::move(idx)));
    }
    return out;
  };

  switch (spec.family) {
    case EncoderFamily::FullyConnected: {
      Var h = stacked;
      for (std::size_t i = 0; i < fc.size(); ++i) {
        h = fc[i].forward(t, h);
        if (i + 1 < fc.size()) {
          h = t.relu(h);
          const bool drop = train && static_cast<int>(i) >= frozen_layers;
          h = nn::dropout(t, h, spec.dropout_p, drop, rng);
        }
      }
      return split_steps(h);
    }
    case EncoderFamily::Conv1d: {
      Var h = stacked;
      for (std::size_t i = 0; i < conv.size(); ++i) {
        h = conv[i].forward(t, h, batch, len);
        h = t.relu(h);
        const bool drop = train && static_cast<int>(i) >= frozen_layers;
        h = nn::dropout(t, h, spec.dropout_p, drop, rng);
      }
      return split_steps(h);
    }
    case EncoderFamily::Recurrent: {
      std::vector<Var> inputs = split_steps(stacked);
      std::vector<Var> hs = (spec.cell == RnnCell::Gru) ? rnn_gru.forward(t, inputs)
                                                        : rnn_lstm.forward(t, inputs);
      const bool drop = train && frozen_layers == 0;
      for (Var& h : hs) h = nn::dropout(t, h, spec.dropout_p, drop, rng);
      return hs;
    }
  }
  throw UsageError("unreachable encoder family");
}

std::vector<Parameter*> Encoder::params() {
  std::vector<Parameter*> out;
  for (auto& l : fc)
    for (auto* p : l.params()) out.push_back(p);
  for (auto& c : conv)
    for (auto* p : c.params()) out.push_back(p);
  if (spec.family == EncoderFamily::Recurrent) {
    auto ps = (spec.cell == RnnCell::Gru) ? rnn_gru.params() : rnn_lstm.params();
    out.insert(out.end(), ps.begin(), ps.end());
  }
  return out;
}

std::vector<Parameter*> Encoder::layer_params(int i) {
  switch (spec.family) {
    case EncoderFamily::FullyConnected: return fc[static_cast<std::size_t>(i)].params();
    case EncoderFamily::Conv1d: return conv[static_cast<std::size_t>(i)].params();
    case EncoderFamily::Recurrent:
      if (i != 0) throw UsageError("recurrent encoder has a single layer");
      return (spec.cell == RnnCell::Gru) ? rnn_gru.params() : rnn_lstm.params();
  }
  return {};
}

Mat stack_windows(const std::vector<Eigen::MatrixXd>& windows,
                  const std::vector<std::size_t>& indices) {
  const long len = windows[indices[0]].rows();
  const long ch = windows[indices[0]].cols();
  Mat out(static_cast<long>(indices.size()) * len, ch);
  for (std::size_t i = 0; i < indices.size(); ++i)
    out.middleRows(static_cast<long>(i) * len, len) = windows[indices[i]];
  return out;
}

}  // namespace cpcseq::model
