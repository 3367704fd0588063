#include "malgrid/corpus.hpp"

#include "malgrid/common.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <array>
#include <cmath>
#include <fstream>
#include <set>

namespace malgrid::corpus {

using ordered_json = nlohmann::ordered_json;

std::string to_string(Label label) {
    switch (label) {
        case Label::benign: return "benign";
        case Label::malware: return "malware";
        case Label::unknown: return "unknown";
        case Label::unlabeled: return "unlabeled";
    }
    return "unlabeled";
}

std::string to_string(Provenance provenance) {
    return provenance == Provenance::synthetic ? "synthetic" : "ingested";
}

std::string to_string(PackProfile profile) {
    switch (profile) {
        case PackProfile::none: return "none";
        case PackProfile::light: return "light";
        case PackProfile::medium: return "medium";
        case PackProfile::heavy: return "heavy";
    }
    return "none";
}

Label parse_label(std::string_view text) {
    if (text == "benign") return Label::benign;
    if (text == "malware") return Label::malware;
    if (text == "unknown") return Label::unknown;
    if (text == "unlabeled") return Label::unlabeled;
    throw Error("unknown label '" + std::string(text) + "'");
}

Provenance parse_provenance(std::string_view text) {
    if (text == "ingested") return Provenance::ingested;
    if (text == "synthetic") return Provenance::synthetic;
    throw Error("unknown provenance '" + std::string(text) + "'");
}

PackProfile parse_pack_profile(std::string_view text) {
    if (text == "none") return PackProfile::none;
    if (text == "light") return PackProfile::light;
    if (text == "medium") return PackProfile::medium;
    if (text == "heavy") return PackProfile::heavy;
    throw Error("unknown pack profile '" + std::string(text) + "'");
}

const Sample* CorpusManifest::find(std::string_view id) const {
    for (const auto& s : entries)
        if (s.id == id) return &s;
    return nullptr;
}

Label label_for_ratio(std::uint64_t positives, std::uint64_t total_engines) {
    if (total_engines == 0) throw Error("scan report: total_engines must be positive");
    if (positives > total_engines) throw Error("scan report: positives exceed total_engines");
    if (positives == 0) return Label::benign;
    if (positives == total_engines) return Label::malware;
    return Label::unknown;
}

namespace {

// Family names only survive on confirmed labels, or on synthetic ground truth.
void enforce_family_rule(Sample& s) {
    if (s.provenance == Provenance::synthetic) return;
    if (s.label != Label::malware && s.label != Label::benign) s.family.reset();
}

}  // namespace

CorpusManifest ingest(const fs::path& root_dir, const LabelMap* label_map,
                      std::vector<std::string>& warnings) {
    std::error_code ec;
    if (!fs::is_directory(root_dir, ec)) throw Error("corpus directory does not exist: " + root_dir.string());

    std::vector<fs::path> files;
    for (auto it = fs::recursive_directory_iterator(root_dir, fs::directory_options::skip_permission_denied, ec);
         !ec && it != fs::recursive_directory_iterator(); it.increment(ec)) {
        if (it->is_regular_file(ec)) files.push_back(it->path());
    }
    std::sort(files.begin(), files.end(),
              [](const fs::path& a, const fs::path& b) { return a.generic_string() < b.generic_string(); });

    CorpusManifest manifest;
    manifest.created_at = utc_timestamp();
    manifest.source_note = "ingested from " + fs::absolute(root_dir).lexically_normal().generic_string();
    std::set<std::string, std::less<>> seen;
    for (const auto& file : files) {
        std::vector<std::uint8_t> bytes;
        try {
            bytes = read_file(file);
        } catch (const Error& e) {
            warnings.push_back("skipped unreadable file " + file.string() + ": " + e.what());
            continue;
        }
        if (bytes.empty()) {
            warnings.push_back("rejected zero-length file " + file.string());
            continue;
        }
        Sample s;
        s.id = sha256_hex(bytes);
        if (!seen.insert(s.id).second) {
            warnings.push_back("skipped duplicate content " + file.string() + " (id " + s.id + ")");
            continue;
        }
        s.path = fs::absolute(file).lexically_normal().generic_string();
        s.size_bytes = bytes.size();
        s.provenance = Provenance::ingested;
        if (label_map) {
            if (auto hit = label_map->find(s.id); hit != label_map->end()) {
                s.label = hit->second.label;
                s.family = hit->second.family;
            }
        }
        enforce_family_rule(s);
        manifest.entries.push_back(std::move(s));
    }
    if (manifest.entries.empty()) throw Error("empty corpus");
    return manifest;
}

CorpusManifest ingest(const fs::path& root_dir, const LabelMap* label_map) {
    std::vector<std::string> warnings;
    return ingest(root_dir, label_map, warnings);
}

CorpusManifest label_from_reports(const CorpusManifest& manifest,
                                  const std::vector<ScanReport>& reports) {
    std::map<std::string, const ScanReport*, std::less<>> by_id;
    std::set<std::string, std::less<>> known;
    for (const auto& s : manifest.entries) known.insert(s.id);
    std::vector<std::string> orphans;
    for (const auto& r : reports) {
        if (!known.contains(r.sample_id)) {
            orphans.push_back(r.sample_id);
            continue;
        }
        by_id[r.sample_id] = &r;
    }
    if (!orphans.empty()) {
        std::string msg = "scan reports reference unknown sample ids:";
        for (const auto& id : orphans) msg += " " + id;
        throw Error(msg);
    }
    CorpusManifest out = manifest;
    for (auto& s : out.entries) {
        if (auto hit = by_id.find(s.id); hit != by_id.end()) {
            s.label = label_for_ratio(hit->second->positives, hit->second->total_engines);
            enforce_family_rule(s);
        }
    }
    return out;
}

// ---------------------------------------------------------------------------
// Synthetic corpora

namespace {

constexpr std::uint64_t kBaseStream = 1;
constexpr std::uint64_t kVariantStream = 2;
constexpr std::uint64_t kCipherStream = 3;
constexpr std::size_t kPackBlock = 4096;
constexpr std::uint8_t kRleMarker = 0x90;

const std::array<std::uint8_t, 256>& substitution_table() {
    static const auto table = [] {
        std::array<std::uint8_t, 256> t{};
        for (int i = 0; i < 256; ++i) t[i] = static_cast<std::uint8_t>(i);
        Rng rng(0x6d616c67726964ULL);
        rng.shuffle(t.begin(), t.end());
        return t;
    }();
    return table;
}

// A base is a sequence of segments, each filled with one texture, so that
// families differ in byteplot layout the way code, data and resource
// sections of real executables do.
void fill_segment(Rng& rng, std::span<std::uint8_t> seg) {
    const std::size_t n = seg.size();
    switch (rng.below(7)) {
        case 0: {  // padding
            const std::uint8_t v = rng.below(3) == 0 ? rng.byte() : 0;
            std::fill(seg.begin(), seg.end(), v);
            break;
        }
        case 1: {  // small alphabet noise
            std::array<std::uint8_t, 16> alphabet{};
            const auto k = 2 + rng.below(14);
            for (std::size_t i = 0; i < k; ++i) alphabet[i] = rng.byte();
            for (auto& b : seg) b = alphabet[rng.below(k)];
            break;
        }
        case 2: {  // periodic pattern
            const auto period = 2 + rng.below(96);
            std::vector<std::uint8_t> pattern(period);
            for (auto& b : pattern) b = rng.byte();
            for (std::size_t i = 0; i < n; ++i) seg[i] = pattern[i % period];
            break;
        }
        case 3: {  // ramp
            const auto start = rng.below(256);
            const auto stride = 1 + rng.below(64);
            for (std::size_t i = 0; i < n; ++i) seg[i] = static_cast<std::uint8_t>(start + i / stride);
            break;
        }
        case 4: {  // high-entropy payload
            for (auto& b : seg) b = rng.byte();
            break;
        }
        case 5: {  // text-like strings
            for (std::size_t i = 0; i < n; ++i) {
                const auto r = rng.below(16);
                seg[i] = r == 0 ? 0 : r == 1 ? ' ' : static_cast<std::uint8_t>('a' + rng.below(26));
            }
            break;
        }
        default: {  // fixed-size records with a few varying fields
            const auto rec = 8 + rng.below(56);
            std::vector<std::uint8_t> proto(rec);
            for (auto& b : proto) b = rng.below(2) ? rng.byte() : 0;
            const auto varying = rng.below(rec);
            for (std::size_t i = 0; i < n; ++i) {
                const auto off = i % rec;
                seg[i] = off == varying ? static_cast<std::uint8_t>(i / rec) : proto[off];
            }
            break;
        }
    }
}

std::uint64_t family_key(const SynthSpec& spec, std::uint32_t family) {
    return mix_seed(mix_seed(spec.seed, kCipherStream), family);
}

std::vector<std::uint8_t> rle_pack(std::span<const std::uint8_t> bytes) {
    std::vector<std::uint8_t> out;
    out.reserve(bytes.size());
    std::size_t i = 0;
    while (i < bytes.size()) {
        const std::uint8_t v = bytes[i];
        std::size_t run = 1;
        while (i + run < bytes.size() && bytes[i + run] == v && run < 255) ++run;
        if (run >= 4) {
            out.insert(out.end(), {kRleMarker, static_cast<std::uint8_t>(run), v});
            i += run;
        } else {
            if (v == kRleMarker) {
                out.insert(out.end(), {kRleMarker, 0});
            } else {
                out.push_back(v);
            }
            ++i;
        }
    }
    return out;
}

void validate(const SynthSpec& spec) {
    if (static_cast<std::uint64_t>(spec.n_families) * spec.variants_per_family == 0)
        throw Error("synthesize: n_families x variants_per_family must be positive");
    if (spec.base_size_bytes == 0) throw Error("synthesize: base_size_bytes must be positive");
    if (!(spec.mutation_rate >= 0.0 && spec.mutation_rate <= 1.0))
        throw Error("synthesize: mutation_rate must lie in [0, 1]");
}

std::string family_name(std::uint32_t family) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "family_%02u", family);
    return buf;
}

}  // namespace

std::vector<std::uint8_t> synth_family_base(const SynthSpec& spec, std::uint32_t family) {
    validate(spec);
    Rng rng(mix_seed(mix_seed(spec.seed, kBaseStream), family));
    std::vector<std::uint8_t> base(spec.base_size_bytes);
    const std::size_t n = base.size();
    const std::size_t min_seg = std::max<std::size_t>(1, n / 40);
    const std::size_t max_seg = std::max<std::size_t>(min_seg, n / 6);
    std::size_t pos = 0;
    while (pos < n) {
        const std::size_t len = std::min(n - pos, min_seg + rng.below(max_seg - min_seg + 1));
        fill_segment(rng, std::span(base).subspan(pos, len));
        pos += len;
    }
    return base;
}

std::vector<std::uint8_t> apply_pack(PackProfile profile, std::span<const std::uint8_t> bytes,
                                     std::uint64_t key) {
    const auto& table = substitution_table();
    switch (profile) {
        case PackProfile::none: return {bytes.begin(), bytes.end()};
        case PackProfile::light: {
            std::vector<std::uint8_t> out(bytes.begin(), bytes.end());
            for (std::size_t i = 0; i < out.size(); ++i)
                if ((i / kPackBlock) % 4 != 3) out[i] = table[out[i]];
            return out;
        }
        case PackProfile::medium: {
            auto out = rle_pack(bytes);
            for (auto& b : out) b = table[b];
            return out;
        }
        case PackProfile::heavy: {
            std::vector<std::uint8_t> out(bytes.begin(), bytes.end());
            Rng stream(key);
            std::uint64_t word = 0;
            for (std::size_t i = 0; i < out.size(); ++i) {
                if (i % 8 == 0) word = stream.next();
                out[i] ^= static_cast<std::uint8_t>(word >> (8 * (i % 8)));
            }
            return out;
        }
    }
    return {bytes.begin(), bytes.end()};
}

std::vector<std::uint8_t> synth_variant(const SynthSpec& spec, std::uint32_t family,
                                        std::uint32_t variant) {
    auto bytes = synth_family_base(spec, family);
    if (spec.mutation_rate > 0.0) {
        Rng rng(mix_seed(mix_seed(spec.seed, kVariantStream),
                         (static_cast<std::uint64_t>(family) << 32) | variant));
        for (auto& b : bytes)
            if (rng.uniform() < spec.mutation_rate) b = rng.byte();
    }
    return apply_pack(spec.pack_profile, bytes, family_key(spec, family));
}

CorpusManifest synthesize(const SynthSpec& spec, const fs::path& out_dir,
                          std::vector<std::string>& warnings) {
    validate(spec);
    fs::create_directories(out_dir);

    const std::size_t total = static_cast<std::size_t>(spec.n_families) * spec.variants_per_family;
    std::vector<Sample> samples(total);
    parallel_for(total, [&](std::size_t k) {
        const auto family = static_cast<std::uint32_t>(k / spec.variants_per_family);
        const auto variant = static_cast<std::uint32_t>(k % spec.variants_per_family);
        const auto bytes = synth_variant(spec, family, variant);
        char name[32];
        std::snprintf(name, sizeof name, "variant_%03u.bin", variant);
        const auto rel = fs::path(family_name(family)) / name;
        write_file(out_dir / rel, bytes);
        auto& s = samples[k];
        s.id = sha256_hex(bytes);
        s.path = rel.generic_string();
        s.size_bytes = bytes.size();
        s.label = Label::malware;
        s.family = family_name(family);
        s.provenance = Provenance::synthetic;
    });

    CorpusManifest manifest;
    manifest.created_at = utc_timestamp();
    char note[256];
    std::snprintf(note, sizeof note,
                  "synthetic: families=%u variants=%u base_size=%llu mutation_rate=%s pack=%s seed=%llu",
                  spec.n_families, spec.variants_per_family,
                  static_cast<unsigned long long>(spec.base_size_bytes),
                  format_double(spec.mutation_rate).c_str(), to_string(spec.pack_profile).c_str(),
                  static_cast<unsigned long long>(spec.seed));
    manifest.source_note = note;
    std::set<std::string, std::less<>> seen;
    for (auto& s : samples) {
        if (!seen.insert(s.id).second) {
            warnings.push_back("variant " + s.path + " duplicates earlier content (id " + s.id + ")");
            continue;
        }
        manifest.entries.push_back(std::move(s));
    }
    return manifest;
}

CorpusManifest synthesize(const SynthSpec& spec, const fs::path& out_dir) {
    std::vector<std::string> warnings;
    return synthesize(spec, out_dir, warnings);
}

double byte_entropy(std::span<const std::uint8_t> bytes) {
    if (bytes.empty()) return 0.0;
    std::array<std::uint64_t, 256> counts{};
    for (auto b : bytes) ++counts[b];
    double h = 0.0;
    const double n = static_cast<double>(bytes.size());
    for (auto c : counts) {
        if (c == 0) continue;
        const double p = static_cast<double>(c) / n;
        h -= p * std::log2(p);
    }
    return h;
}

// ---------------------------------------------------------------------------
// Serialization

std::string manifest_to_json(const CorpusManifest& manifest) {
    ordered_json entries = ordered_json::array();
    for (const auto& s : manifest.entries) {
        ordered_json e;
        e["id"] = s.id;
        e["path"] = s.path;
        e["size_bytes"] = s.size_bytes;
        e["label"] = to_string(s.label);
        e["family"] = s.family ? ordered_json(*s.family) : ordered_json(nullptr);
        e["provenance"] = to_string(s.provenance);
        entries.push_back(std::move(e));
    }
    ordered_json doc;
    doc["entries"] = std::move(entries);
    doc["created_at"] = manifest.created_at;
    doc["source_note"] = manifest.source_note;
    return doc.dump(2) + "\n";
}

CorpusManifest manifest_from_json(std::string_view text) {
    CorpusManifest m;
    try {
        const auto doc = ordered_json::parse(text);
        m.created_at = doc.at("created_at").get<std::string>();
        m.source_note = doc.at("source_note").get<std::string>();
        std::set<std::string, std::less<>> seen;
        for (const auto& e : doc.at("entries")) {
            Sample s;
            s.id = e.at("id").get<std::string>();
            s.path = e.at("path").get<std::string>();
            s.size_bytes = e.at("size_bytes").get<std::uint64_t>();
            s.label = parse_label(e.at("label").get<std::string>());
            if (!e.at("family").is_null()) s.family = e.at("family").get<std::string>();
            s.provenance = parse_provenance(e.at("provenance").get<std::string>());
            if (!seen.insert(s.id).second) throw Error("duplicate sample id " + s.id);
            m.entries.push_back(std::move(s));
        }
    } catch (const nlohmann::json::exception& e) {
        throw Error(std::string("malformed manifest: ") + e.what());
    }
    return m;
}

void save_manifest(const CorpusManifest& manifest, const fs::path& path) {
    write_text(path, manifest_to_json(manifest));
}

CorpusManifest load_manifest(const fs::path& path) {
    if (!fs::is_regular_file(path)) throw Error("manifest not found: " + path.string());
    auto m = manifest_from_json(read_text(path));
    const auto base = fs::absolute(path).parent_path();
    for (auto& s : m.entries) {
        const fs::path p(s.path);
        if (p.is_relative()) s.path = (base / p).lexically_normal().generic_string();
    }
    return m;
}

std::vector<ScanReport> parse_scan_reports(std::string_view csv) {
    const auto lines = split_lines(csv);
    if (lines.empty() || lines.front() != "sample_id,positives,total_engines")
        throw Error("scan report CSV must start with header 'sample_id,positives,total_engines'");
    std::vector<ScanReport> reports;
    for (std::size_t i = 1; i < lines.size(); ++i) {
        if (lines[i].empty()) continue;
        const auto f = split_csv_line(lines[i]);
        if (f.size() != 3) throw Error("scan report line " + std::to_string(i + 1) + ": expected 3 fields");
        const auto pos = parse_int(f[1]);
        const auto total = parse_int(f[2]);
        if (pos < 0 || total <= 0 || pos > total)
            throw Error("scan report line " + std::to_string(i + 1) +
                        ": need 0 <= positives <= total_engines and total_engines > 0");
        reports.push_back({f[0], static_cast<std::uint64_t>(pos), static_cast<std::uint64_t>(total)});
    }
    return reports;
}

std::vector<ScanReport> load_scan_reports(const fs::path& path) {
    return parse_scan_reports(read_text(path));
}

LabelMap load_label_map(const fs::path& path) {
    const auto lines = split_lines(read_text(path));
    if (lines.empty() || lines.front() != "sample_id,label,family")
        throw Error("label map CSV must start with header 'sample_id,label,family'");
    LabelMap map;
    for (std::size_t i = 1; i < lines.size(); ++i) {
        if (lines[i].empty()) continue;
        const auto f = split_csv_line(lines[i]);
        if (f.size() != 3) throw Error("label map line " + std::to_string(i + 1) + ": expected 3 fields");
        LabelEntry e;
        e.label = parse_label(f[1]);
        if (!f[2].empty()) e.family = f[2];
        map[f[0]] = std::move(e);
    }
    return map;
}

}  // namespace malgrid::corpus
