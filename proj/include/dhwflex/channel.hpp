#pragma once

#include <stdexcept>
#include <vector>

#include "dhwflex/rng.hpp"

namespace dhwflex::channel {

struct ChannelParams {
    double p_drop = 0.0;      // per-message drop probability
    double delay_lo_s = 2.0;  // command latency range (sub-minute, logged only)
    double delay_hi_s = 4.0;
    // Long-held on-intents are re-announced at this cadence; there is still no
    // delivery feedback, so a dropped message stays unnoticed until then.
    int refresh_period_min = 60;

    void validate() const {
        if (p_drop < 0 || p_drop > 1) throw std::invalid_argument("p_drop in [0,1]");
        if (delay_lo_s < 0 || delay_hi_s < delay_lo_s)
            throw std::invalid_argument("bad delay range");
        if (refresh_period_min < 1) throw std::invalid_argument("refresh_period_min >= 1");
    }
};

// Edge-triggered command transport between the dispatcher and the devices.
// A message is sent only when a device's commanded state changes. Switch-on
// messages drop independently with p_drop; a dropped switch-on leaves the
// previous physical command in force (the device stays governed by its backup
// controller) and is never retried, because the dispatcher gets no delivery
// feedback. Switch-off transitions are fail-safe releases and always take
// effect. Latencies are sampled per message for reporting; at 1-minute
// resolution they never move a command across a step boundary.
class LossyChannel {
public:
    LossyChannel(const ChannelParams& params, int n_devices, Rng rng)
        : params_(params),
          rng_(rng),
          intent_(n_devices, 0),
          effective_(n_devices, 0),
          held_min_(n_devices, 0) {
        params_.validate();
    }

    // Applies one minute of commands; returns the per-device effective command.
    const std::vector<int>& step(const std::vector<int>& commanded) {
        if (commanded.size() != intent_.size())
            throw std::invalid_argument("channel: device count mismatch");
        for (size_t i = 0; i < commanded.size(); ++i) {
            const int u = commanded[i];
            bool send = u != intent_[i];
            if (!send && u == 1 && ++held_min_[i] >= params_.refresh_period_min) send = true;
            if (!send) continue;
            held_min_[i] = 0;
            ++messages_;
            delay_sum_s_ += rng_.uniform(params_.delay_lo_s, params_.delay_hi_s);
            if (u == 1) {
                if (rng_.bernoulli(params_.p_drop)) {
                    ++dropped_;  // stale effective state persists
                } else {
                    effective_[i] = 1;
                }
            } else {
                effective_[i] = 0;
            }
            intent_[i] = u;
        }
        return effective_;
    }

    const std::vector<int>& effective() const { return effective_; }
    long messages() const { return messages_; }
    long dropped() const { return dropped_; }
    double mean_delay_s() const { return messages_ ? delay_sum_s_ / messages_ : 0.0; }

private:
    ChannelParams params_;
    Rng rng_;
    std::vector<int> intent_;
    std::vector<int> effective_;
    std::vector<int> held_min_;
    long messages_ = 0;
    long dropped_ = 0;
    double delay_sum_s_ = 0.0;
};

} // namespace dhwflex::channel
