#pragma once

// Line-delimited record formats: CSI traces, feature sequences and
// simulated datasets.

#include <filesystem>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "unifi/csi.hpp"
#include "unifi/features.hpp"
#include "unifi/simulator.hpp"

namespace unifi {

/// Header `{"n_sub":..,"n_rx":..}` then one `{"ts":..,"csi":[[re,im],...]}`
/// record per frame, subcarrier-major. An empty frame list writes nothing.
void write_csi_trace(std::ostream& os, std::span<const CsiFrame> frames);
std::vector<CsiFrame> read_csi_trace(std::istream& is);

void write_csi_trace(const std::filesystem::path& path, std::span<const CsiFrame> frames);
std::vector<CsiFrame> read_csi_trace(const std::filesystem::path& path);

/// One `{"ts":..,"corr_s":..,"dser_s":..,"plcr":..,"corr_l":..,"dser_l":..}`
/// record per frame; sentinels are written as null.
void write_feature_sequence(std::ostream& os, std::span<const FeatureFrame> frames);
std::vector<FeatureFrame> read_feature_sequence(std::istream& is);

void write_feature_sequence(const std::filesystem::path& path, std::span<const FeatureFrame> frames);
std::vector<FeatureFrame> read_feature_sequence(const std::filesystem::path& path);

/// One record per sequence:
/// `{"id","f_s","sim","real","pos","feat","speed","heading"}`. The last two
/// keys carry the trajectory's per-step speed and heading; the reader also
/// accepts records without them and derives both from `pos`.
void write_dataset(std::ostream& os, std::span<const LabeledSequence> sequences);
std::vector<LabeledSequence> read_dataset(std::istream& is);
void write_dataset(const std::filesystem::path& path, std::span<const LabeledSequence> sequences);
std::vector<LabeledSequence> read_dataset(const std::filesystem::path& path);

namespace detail {

/// Shortest decimal that round-trips to the same double.
void append_number(std::string& out, double v);
/// As append_number, but NaN becomes `null`.
void append_number_or_null(std::string& out, double v);

std::ofstream open_for_write(const std::filesystem::path& path);
std::ifstream open_for_read(const std::filesystem::path& path);

}  // namespace detail
}  // namespace unifi
