#pragma once

#include "malgrid/util.hpp"

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace malgrid::corpus {

enum class Label { benign, malware, unknown, unlabeled };
enum class Provenance { ingested, synthetic };
enum class PackProfile { none, light, medium, heavy };

std::string to_string(Label label);
std::string to_string(Provenance provenance);
std::string to_string(PackProfile profile);
Label parse_label(std::string_view text);
Provenance parse_provenance(std::string_view text);
PackProfile parse_pack_profile(std::string_view text);

struct Sample {
    std::string id;  ///< SHA-256 of the file content, lowercase hex.
    std::string path;
    std::uint64_t size_bytes = 0;
    Label label = Label::unlabeled;
    std::optional<std::string> family;
    Provenance provenance = Provenance::ingested;

    bool operator==(const Sample&) const = default;
};

struct ScanReport {
    std::string sample_id;
    std::uint64_t positives = 0;
    std::uint64_t total_engines = 1;
};

struct CorpusManifest {
    std::vector<Sample> entries;
    std::string created_at;
    std::string source_note;

    const Sample* find(std::string_view id) const;
};

struct SynthSpec {
    std::uint32_t n_families = 4;
    std::uint32_t variants_per_family = 10;
    std::uint64_t base_size_bytes = 64 * 1024;
    double mutation_rate = 0.02;
    PackProfile pack_profile = PackProfile::none;
    std::uint64_t seed = 0;
};

struct LabelEntry {
    Label label = Label::unlabeled;
    std::optional<std::string> family;
};
using LabelMap = std::map<std::string, LabelEntry, std::less<>>;

/// The three-way detection-ratio rule: no engine flags it -> benign,
/// every engine flags it -> malware, anything in between -> unknown.
Label label_for_ratio(std::uint64_t positives, std::uint64_t total_engines);

/// One Sample per regular file under root_dir (recursive, sorted by path).
/// Zero-length, unreadable and duplicate-content files are skipped and
/// described in `warnings`. Throws "empty corpus" when nothing remains.
CorpusManifest ingest(const fs::path& root_dir, const LabelMap* label_map,
                      std::vector<std::string>& warnings);
CorpusManifest ingest(const fs::path& root_dir, const LabelMap* label_map = nullptr);

/// Relabels samples that have a report; others keep their label.
/// Throws listing every report id that is not in the manifest.
CorpusManifest label_from_reports(const CorpusManifest& manifest,
                                  const std::vector<ScanReport>& reports);

/// Writes a ground-truth corpus to out_dir (family_XX/variant_YYY.bin) and
/// returns its manifest. Paths in the manifest are relative to out_dir.
/// Variants whose bytes collide with an earlier file are listed only once.
CorpusManifest synthesize(const SynthSpec& spec, const fs::path& out_dir,
                          std::vector<std::string>& warnings);
CorpusManifest synthesize(const SynthSpec& spec, const fs::path& out_dir);

/// Bytes of one synthetic sample, without touching the filesystem.
std::vector<std::uint8_t> synth_family_base(const SynthSpec& spec, std::uint32_t family);
std::vector<std::uint8_t> synth_variant(const SynthSpec& spec, std::uint32_t family,
                                        std::uint32_t variant);
std::vector<std::uint8_t> apply_pack(PackProfile profile, std::span<const std::uint8_t> bytes,
                                     std::uint64_t family_key);

/// Shannon entropy of the byte histogram, in bits per byte.
double byte_entropy(std::span<const std::uint8_t> bytes);

std::string manifest_to_json(const CorpusManifest& manifest);
CorpusManifest manifest_from_json(std::string_view text);
void save_manifest(const CorpusManifest& manifest, const fs::path& path);
/// Loads a manifest and resolves relative sample paths against its directory.
CorpusManifest load_manifest(const fs::path& path);

std::vector<ScanReport> parse_scan_reports(std::string_view csv);
std::vector<ScanReport> load_scan_reports(const fs::path& path);

/// Reads a label table CSV with header `sample_id,label,family`.
LabelMap load_label_map(const fs::path& path);

}  // namespace malgrid::corpus
