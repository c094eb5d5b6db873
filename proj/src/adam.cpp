#include "adam.hpp"

#include <cmath>

namespace groundnet {

Adam::Adam(const ParamStore& store, AdamConfig cfg) : cfg_(cfg) {
  m_.resize(store.size());
  v_.resize(store.size());
  for (int i = 0; i < store.size(); ++i) {
    m_[i].assign(store[i].data.size(), 0.0);
    v_[i].assign(store[i].data.size(), 0.0);
  }
}

void Adam::step(ParamStore& store) {
  if (store.size() != static_cast<int>(m_.size())) {
    throw ConfigError("adam: parameter store changed size");
  }
  ++t_;
  const double c1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(t_));
  const double c2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(t_));
  for (int i = 0; i < store.size(); ++i) {
    ParamTensor& p = store[i];
    if (p.grad.size() != p.data.size()) {
      throw InputError("adam: gradient missing for tensor '" + p.name + "'");
    }
    Vec& m = m_[i];
    Vec& v = v_[i];
    for (size_t j = 0; j < p.data.size(); ++j) {
      const double g = p.grad[j];
      m[j] = cfg_.beta1 * m[j] + (1.0 - cfg_.beta1) * g;
      v[j] = cfg_.beta2 * v[j] + (1.0 - cfg_.beta2) * g * g;
      const double mhat = m[j] / c1;
      const double vhat = v[j] / c2;
      p.data[j] -= cfg_.lr * mhat / (std::sqrt(vhat) + cfg_.epsilon);
    }
  }
}

}  // namespace groundnet
