#pragma once

#include <concepts>
#include <mutex>
#include <shared_mutex>
#include <utility>

#include "gridengine/model.hpp"

namespace gridengine {

/// An algorithm that writes solution state back into the model.
template <class A>
concept MutableAlgorithm = requires(const A& algo, NetworkModel& net) { algo.apply(net); };

/// An algorithm that only reads the model; safe to run concurrently.
template <class A>
concept ImmutableAlgorithm = requires(const A& algo, const NetworkModel& net) { algo.apply(net); };

/// Owns a model and enforces its access contract: one writer at a time, any
/// number of concurrent readers while no writer is active.
class ModelHandle {
public:
    explicit ModelHandle(NetworkModel net) : net_(std::move(net)) {}

    ModelHandle(const ModelHandle&) = delete;
    ModelHandle& operator=(const ModelHandle&) = delete;

    template <class F>
    decltype(auto) read(F&& f) const
    {
        std::shared_lock lock(mutex_);
        return std::forward<F>(f)(std::as_const(net_));
    }

    template <class F>
    decltype(auto) write(F&& f)
    {
        std::unique_lock lock(mutex_);
        return std::forward<F>(f)(net_);
    }

    template <MutableAlgorithm A>
    auto apply_mutable(const A& algo)
    {
        return write([&](NetworkModel& net) { return algo.apply(net); });
    }

    template <ImmutableAlgorithm A>
    auto apply_immutable(const A& algo) const
    {
        return read([&](const NetworkModel& net) { return algo.apply(net); });
    }

    NetworkModel snapshot() const
    {
        return read([](const NetworkModel& net) { return net; });
    }

    /// Releases the model, e.g. to move it to another thread of control.
    NetworkModel release() &&
    {
        std::unique_lock lock(mutex_);
        return std::move(net_);
    }

private:
    mutable std::shared_mutex mutex_;
    NetworkModel net_;
};

}  // namespace gridengine
