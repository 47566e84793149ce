#include "tgnn/params.hpp"

#include "tgnn/error.hpp"

namespace tgnn {

ad::Parameter& ParamStore::add(const std::string& name, ad::Matrix value) {
    if (contains(name)) throw ContractError("parameter '" + name + "' already exists");
    index_.emplace(name, items_.size());
    ad::Parameter p;
    p.name = name;
    p.value = std::move(value);
    p.zero_grad();
    items_.push_back(std::move(p));
    return items_.back();
}

std::size_t ParamStore::index_of(const std::string& name) const {
    auto it = index_.find(name);
    if (it == index_.end()) throw ReferenceError("unknown parameter '" + name + "'");
    return it->second;
}

ad::Parameter& ParamStore::at(const std::string& name) { return items_[index_of(name)]; }

const ad::Parameter& ParamStore::at(const std::string& name) const { return items_[index_of(name)]; }

void ParamStore::zero_grad() {
    for (auto& p : items_) p.zero_grad();
}

double ParamStore::squared_norm() const {
    double s = 0.0;
    for (const auto& p : items_)
        for (double v : p.value.data) s += v * v;
    return s;
}

} // namespace tgnn
