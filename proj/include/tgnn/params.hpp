#pragma once

#include <map>
#include <string>
#include <vector>

#include "tgnn/autodiff.hpp"

namespace tgnn {

// Named parameters in insertion order. Addresses are stable once the store
// is fully populated; the tape binds to them by pointer.
class ParamStore {
public:
    ad::Parameter& add(const std::string& name, ad::Matrix value);
    ad::Parameter& at(const std::string& name);
    const ad::Parameter& at(const std::string& name) const;
    bool contains(const std::string& name) const { return index_.count(name) != 0; }
    std::size_t index_of(const std::string& name) const;

    std::vector<ad::Parameter>& items() noexcept { return items_; }
    const std::vector<ad::Parameter>& items() const noexcept { return items_; }
    std::size_t size() const noexcept { return items_.size(); }
    ad::Parameter& operator[](std::size_t i) { return items_[i]; }
    const ad::Parameter& operator[](std::size_t i) const { return items_[i]; }

    void zero_grad();
    // Σ ‖θ‖² over every parameter.
    double squared_norm() const;

private:
    std::vector<ad::Parameter> items_;
    std::map<std::string, std::size_t> index_;
};

} // namespace tgnn
