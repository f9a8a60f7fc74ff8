#pragma once

#include "selfadapt/deltaiot/network.hpp"
#include "selfadapt/qmodels/registry.hpp"

namespace selfadapt::qmodels {

/// One DeltaIoT adaptation option evaluated under the current environment.
struct IotOption {
  const deltaiot::Topology* topology = nullptr;
  deltaiot::NetworkSettings settings;
  deltaiot::UncertaintyState env;
};

/// Native: hand-written kernels. Dsl: the embedded automata models,
/// interpreted. Both describe the same stochastic process.
enum class Form { Native, Dsl };

/// Latency runs fill the queues for kLatencyWarmup cycles, then average
/// the backlog over kLatencyCycles more (queues carry over throughout).
constexpr int kLatencyWarmup = 6;
constexpr int kLatencyCycles = 3;

/// 1 if a packet from a load-weighted random source is lost on its way to
/// the gateway, else 0.
smc::Trial packet_loss_trial(const IotOption& o, Form form = Form::Native);
/// Transmission energy (C) of one cycle started from empty queues.
smc::Trial energy_trial(const IotOption& o, Form form = Form::Native);
/// Mean per-cycle backlog percentage over the measured cycles.
smc::Trial latency_trial(const IotOption& o, Form form = Form::Native);

/// Listening energy per cycle; the same for every option.
double reception_energy(const IotOption& o);

using IotModel = QualityModel<IotOption>;
using IotRegistry = ModelRegistry<IotOption>;

IotModel packet_loss_model(Form form = Form::Native);
IotModel energy_model(Form form = Form::Native);
IotModel latency_model(Form form = Form::Native);

/// packetLoss and energy. Latency is added at runtime.
IotRegistry default_registry(Form form = Form::Native);

}  // namespace selfadapt::qmodels
