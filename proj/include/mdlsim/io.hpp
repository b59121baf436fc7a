#pragma once

#include <string>

#include "mdlsim/channel.hpp"
#include "mdlsim/dsp.hpp"

namespace mdlsim {

/// Binary container: 8-byte magic "MDLSIMC1", u32 kind, u32 JSON header
/// length, JSON header, then raw little-endian IEEE-754 doubles. Complex
/// matrices are serialized row-major as interleaved (re, im) pairs, bins in
/// order. Kinds: 1 channel spectrum, 2 equalizer solution, 3 MDL estimate.
/// Writing the same object twice produces byte-identical files.

void save_channel(const ChannelSpectrum& channel, const std::string& path);
ChannelSpectrum load_channel(const std::string& path);

void save_equalizer(const EqualizerSolution& eq, const std::string& path);
EqualizerSolution load_equalizer(const std::string& path);

void save_estimate(const MdlEstimate& estimate, const std::string& path);
MdlEstimate load_estimate(const std::string& path);

}  // namespace mdlsim
