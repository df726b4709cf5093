#include "mgnet/checkpoint.hpp"

#include <json.hpp>

#include "mgnet/error.hpp"

namespace mgnet {

Checkpoint pack_model(const ModelCheckpoint &mc) {
  Checkpoint c;
  c.config_echo = mc.config_echo;
  if (mc.u1.size() > 0) c.matrices.emplace_back("u1", mc.u1);
  c.matrices.emplace_back("a_hat", mc.a_hat);
  for (std::size_t l = 0; l < mc.params.layer_count(); ++l)
    c.matrices.emplace_back("w" + std::to_string(l), mc.params.layer_weights[l]);
  Matrix alpha(1, mc.params.alpha.size());
  for (std::size_t m = 0; m < mc.params.alpha.size(); ++m)
    alpha(0, m) = mc.params.alpha[m];
  c.matrices.emplace_back("alpha", alpha);
  c.matrices.emplace_back("fcn_w", mc.params.fcn_weights);
  Matrix bias(1, mc.params.fcn_bias.size());
  for (std::size_t k = 0; k < mc.params.fcn_bias.size(); ++k)
    bias(0, k) = mc.params.fcn_bias[k];
  c.matrices.emplace_back("fcn_b", bias);
  return c;
}

ModelCheckpoint unpack_model(const Checkpoint &c) {
  ModelCheckpoint mc;
  mc.config_echo = c.config_echo;
  if (c.has("u1")) mc.u1 = c.get("u1");
  mc.a_hat = c.get("a_hat");
  if (mc.a_hat.rows != mc.a_hat.cols)
    throw DataError("checkpoint: a_hat is " + std::to_string(mc.a_hat.rows) +
                    "x" + std::to_string(mc.a_hat.cols) + ", expected square");

  for (std::size_t l = 0; c.has("w" + std::to_string(l)); ++l)
    mc.params.layer_weights.push_back(c.get("w" + std::to_string(l)));
  if (mc.params.layer_weights.empty())
    throw DataError("checkpoint: no layer weights (w0 missing)");

  const Matrix &alpha = c.get("alpha");
  mc.params.alpha.assign(alpha.data.begin(), alpha.data.end());
  mc.params.fcn_weights = c.get("fcn_w");
  const Matrix &bias = c.get("fcn_b");
  mc.params.fcn_bias.assign(bias.data.begin(), bias.data.end());

  const std::size_t n = mc.a_hat.rows;
  if (mc.params.layer_weights.front().rows != n)
    throw DataError("checkpoint: w0 expects " +
                    std::to_string(mc.params.layer_weights.front().rows) +
                    " input features but the graph has " + std::to_string(n) +
                    " nodes");
  const std::size_t flat = n * mc.params.d_out();
  if (mc.params.fcn_weights.cols != flat)
    throw DataError("checkpoint: fcn_w has " +
                    std::to_string(mc.params.fcn_weights.cols) +
                    " columns, expected " + std::to_string(flat));
  if (mc.params.fcn_bias.size() != mc.params.fcn_weights.rows)
    throw DataError("checkpoint: fcn_b length does not match fcn_w rows");

  try {
    const auto doc = nlohmann::json::parse(mc.config_echo);
    if (doc.contains("dropout"))
      mc.params.dropout_rate = doc["dropout"].get<double>();
  } catch (const nlohmann::json::exception &) {
    // config echo is informational; forward passes run in eval mode anyway
  }
  return mc;
}

}  // namespace mgnet
