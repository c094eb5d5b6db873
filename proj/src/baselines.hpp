#pragma once

#include "model.hpp"
#include "text_encoder.hpp"

namespace groundnet {

// Decoder width for the t-CNN text head: filter*filter*k kernel weights plus
// the three gradient-map coefficients.
int tcnn_param_size(int filter, int k);

// Text vector used as a convolution kernel over the observation embedding.
class TCnnModel : public Model {
 public:
  TCnnModel(ModelConfig cfg, uint64_t seed);
  TCnnModel(ModelConfig cfg, const ParamStore& loaded);

  Var value_map(Tape& tape, const std::vector<int>& obs,
                const std::vector<int>& tokens,
                ForwardTrace* trace = nullptr) const override;

 private:
  std::unique_ptr<LstmEncoder> lstm_;
  int obs_embedding_ = -1;
  int decoder_ = -1;
  int decoder_bias_ = -1;
  int head_conv_ = -1;
  int head_conv_bias_ = -1;
};

// Text vector concatenated with the flattened observation, decoded back to a
// map with a transposed convolution.
class TUvfaModel : public Model {
 public:
  TUvfaModel(ModelConfig cfg, uint64_t seed);
  TUvfaModel(ModelConfig cfg, const ParamStore& loaded);

  Var value_map(Tape& tape, const std::vector<int>& obs,
                const std::vector<int>& tokens,
                ForwardTrace* trace = nullptr) const override;

 private:
  std::unique_ptr<LstmEncoder> lstm_;
  int obs_embedding_ = -1;
  int text_proj_ = -1;
  int text_proj_bias_ = -1;
  int dense_ = -1;
  int dense_bias_ = -1;
  int deconv_ = -1;
  int deconv_bias_ = -1;
};

// Convolutional image encoder, text vector concatenated before two dense
// tanh layers, softmax output.
class TVggModel : public Model {
 public:
  TVggModel(ModelConfig cfg, uint64_t seed);
  TVggModel(ModelConfig cfg, const ParamStore& loaded);

  Var class_logits(Tape& tape, const Vec& image,
                   const std::vector<int>& tokens,
                   ForwardTrace* trace = nullptr) const override;

 private:
  std::unique_ptr<LstmEncoder> lstm_;
  std::vector<int> conv_;
  std::vector<int> conv_bias_;
  int dense1_ = -1, dense1_bias_ = -1;
  int dense2_ = -1, dense2_bias_ = -1;
  int out_ = -1, out_bias_ = -1;
};

}  // namespace groundnet
