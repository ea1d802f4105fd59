#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <numeric>
#include <random>

#include "medrag/corpus.hpp"
#include "medrag/errors.hpp"
#include "medrag/image.hpp"
#include "support/test_support.hpp"

using namespace medrag;
using testsupport::TempDir;

// ---------------------------------------------------------------------------
// chunk_document

TEST_CASE("chunker stride arithmetic") {
    const std::string text(2200, 'x');
    const auto chunks = chunk_document(Corpus::research, "doc", text);
    REQUIRE(chunks.size() == 3);
    CHECK(chunks[0].char_offset == 0);
    CHECK(chunks[1].char_offset == 800);
    CHECK(chunks[2].char_offset == 1600);
    CHECK(chunks[0].text.size() == 1000);
    CHECK(chunks[1].text.size() == 1000);
    CHECK(chunks[2].text.size() == 600);
    CHECK(chunks[0].chunk_id == "doc:0");
    CHECK(chunks[2].corpus == Corpus::research);
}

TEST_CASE("chunker single window") {
    const auto chunks = chunk_document(Corpus::wiki, "d", std::string(1000, 'a'));
    REQUIRE(chunks.size() == 1);
    CHECK(chunks[0].char_offset == 0);
    CHECK(chunks[0].text.size() == 1000);
}

TEST_CASE("chunker degenerate input") {
    CHECK(chunk_document(Corpus::book, "d", "").empty());
}

TEST_CASE("chunker rejects bad parameters") {
    CHECK_THROWS_AS(chunk_document(Corpus::book, "d", "abc", 100, 100), ParameterError);
    CHECK_THROWS_AS(chunk_document(Corpus::book, "d", "abc", 100, 200), ParameterError);
    CHECK_THROWS_AS(chunk_document(Corpus::book, "d", "abc", 0, 0), ParameterError);
}

namespace {
std::size_t expected_chunk_count(std::size_t len, std::size_t max_len, std::size_t overlap) {
    if (len == 0) return 0;
    if (len <= max_len) return 1;
    const std::size_t stride = max_len - overlap;
    return (std::max<std::size_t>(len - overlap, 1) + stride - 1) / stride;
}
}  // namespace

TEST_CASE("chunker round trip and overlap over random texts") {
    std::mt19937_64 rng(7);
    std::uniform_int_distribution<std::size_t> len_dist(0, 10000);
    for (int iter = 0; iter < 300; ++iter) {
        const auto text = testsupport::random_text(rng, len_dist(rng));
        const auto chunks = chunk_document(Corpus::guideline, "doc", text);

        CHECK(chunks.size() == expected_chunk_count(text.size(), 1000, 200));

        std::string rebuilt;
        for (std::size_t i = 0; i < chunks.size(); ++i) {
            CHECK(chunks[i].text.size() <= 1000);
            if (i == 0) {
                CHECK(chunks[i].char_offset == 0);
                rebuilt = chunks[i].text;
            } else {
                CHECK(chunks[i].char_offset == chunks[i - 1].char_offset + 800);
                // consecutive chunks share exactly the 200-char overlap
                const auto prev_tail = chunks[i - 1].text.substr(chunks[i - 1].text.size() - 200);
                REQUIRE(chunks[i].text.size() > 200);
                CHECK(prev_tail == chunks[i].text.substr(0, 200));
                rebuilt += chunks[i].text.substr(200);
            }
        }
        CHECK(rebuilt == text);
    }
}

// ---------------------------------------------------------------------------
// graph store

namespace {
std::vector<GraphTerm> sample_terms() {
    return {{"T1", "Lipoma", "A benign tumor of fat tissue."},
            {"T2", "Renal cyst", ""},
            {"T3", "Angiomyolipoma", "A tumor containing fat, muscle, and vessels."}};
}
}  // namespace

TEST_CASE("graph ingest counts") {
    GraphStore store;
    const auto stats = store.ingest(sample_terms(), {{"T1", "associated_with", "T3"},
                                                     {"T2", "finding_site", "T3"}});
    CHECK(stats.terms == 3);
    CHECK(stats.relations == 2);
    CHECK(stats.rejected == 0);
    CHECK(store.find_term("lipoma") != nullptr);
    CHECK(store.find_term("  LIPOMA  ") != nullptr);
    CHECK(store.find_term("nope") == nullptr);
    CHECK(store.one_hop("T3").size() == 2);
}

TEST_CASE("graph ingest rejects dangling relations") {
    GraphStore store;
    const auto stats = store.ingest(sample_terms(), {{"T1", "isa", "T9"}});
    CHECK(stats.relations == 0);
    CHECK(stats.rejected == 1);
}

TEST_CASE("graph ingest rejects case-folded duplicate surfaces") {
    GraphStore store;
    const auto stats = store.ingest({{"T1", "Lipoma", ""}, {"T2", "LIPOMA", ""}}, {});
    CHECK(stats.terms == 1);
    CHECK(stats.rejected == 1);
    CHECK(store.find_term("lipoma")->term_id == "T1");
}

TEST_CASE("graph ingestion is idempotent") {
    const auto terms = sample_terms();
    const std::vector<GraphRelation> relations{{"T1", "associated_with", "T3"}};

    GraphStore once;
    once.ingest(terms, relations);
    GraphStore twice;
    twice.ingest(terms, relations);
    const auto again = twice.ingest(terms, relations);
    CHECK(again.terms == 0);
    CHECK(again.relations == 0);
    CHECK(again.rejected == terms.size() + relations.size());
    CHECK(twice.term_count() == once.term_count());
    CHECK(twice.relation_count() == once.relation_count());
}

TEST_CASE("graph store save/load round trip") {
    TempDir dir("graph");
    GraphStore store;
    store.ingest(sample_terms(), {{"T1", "associated_with", "T3"}});
    store.save(dir / "terms.jsonl", dir / "relations.jsonl");

    const auto loaded = GraphStore::load(dir / "terms.jsonl", dir / "relations.jsonl");
    CHECK(loaded.term_count() == 3);
    CHECK(loaded.relation_count() == 1);
    CHECK(loaded.find_term("renal cyst") != nullptr);
}

// ---------------------------------------------------------------------------
// perceptual hash

namespace {

Bitmap make_bitmap(int w, int h, const std::vector<std::uint8_t>& px) {
    Bitmap b;
    b.width = w;
    b.height = h;
    for (auto v : px) b.gray.push_back(v);
    return b;
}

std::vector<std::uint8_t> random_pixels(std::mt19937_64& rng, int w, int h) {
    std::uniform_int_distribution<int> dist(0, 255);
    std::vector<std::uint8_t> px(static_cast<std::size_t>(w) * h);
    for (auto& v : px) v = static_cast<std::uint8_t>(dist(rng));
    return px;
}

// independent re-computation of the documented scheme, written from its
// definition: box-average onto 9x8, bit gy*8+gx set iff cell > right neighbor
std::uint64_t reference_dhash(int w, int h, const std::vector<std::uint8_t>& px) {
    auto cell_mean = [&](int x0, int x1, int y0, int y1) {
        double sum = 0.0;
        int n = 0;
        for (int y = y0; y < y1; ++y) {
            for (int x = x0; x < x1; ++x) {
                sum += px[static_cast<std::size_t>(y) * w + x];
                ++n;
            }
        }
        return sum / n;
    };
    std::uint64_t hash = 0;
    for (int gy = 0; gy < 8; ++gy) {
        int y0 = gy * h / 8, y1 = (gy + 1) * h / 8;
        if (y1 <= y0) y1 = y0 + 1;
        double row[9];
        for (int gx = 0; gx < 9; ++gx) {
            int x0 = gx * w / 9, x1 = (gx + 1) * w / 9;
            if (x1 <= x0) x1 = x0 + 1;
            row[gx] = cell_mean(x0, x1, y0, y1);
        }
        for (int gx = 0; gx < 8; ++gx) {
            if (row[gx] > row[gx + 1]) hash |= std::uint64_t{1} << (gy * 8 + gx);
        }
    }
    return hash;
}

}  // namespace

TEST_CASE("perceptual hash determinism") {
    std::mt19937_64 rng(11);
    const auto px = random_pixels(rng, 40, 30);
    const auto a = perceptual_hash(make_bitmap(40, 30, px));
    const auto b = perceptual_hash(make_bitmap(40, 30, px));
    CHECK(a == b);
    CHECK(hamming_distance(a, b) == 0);
}

TEST_CASE("perceptual hash of a uniform image is zero") {
    CHECK(perceptual_hash(make_bitmap(16, 16, std::vector<std::uint8_t>(256, 0))) == 0);
    CHECK(perceptual_hash(make_bitmap(16, 16, std::vector<std::uint8_t>(256, 200))) == 0);
}

TEST_CASE("perceptual hash matches the reference recomputation") {
    std::mt19937_64 rng(13);
    for (const auto [w, h] : {std::pair{36, 32}, {9, 8}, {100, 60}, {7, 5}, {1, 1}}) {
        const auto px = random_pixels(rng, w, h);
        CHECK(perceptual_hash(make_bitmap(w, h, px)) == reference_dhash(w, h, px));
    }
}

TEST_CASE("mirror distance equals the reference oracle") {
    std::mt19937_64 rng(17);
    for (int iter = 0; iter < 10; ++iter) {
        const int w = 45, h = 36;
        const auto px = random_pixels(rng, w, h);
        std::vector<std::uint8_t> mirrored(px.size());
        for (int y = 0; y < h; ++y) {
            for (int x = 0; x < w; ++x) {
                mirrored[static_cast<std::size_t>(y) * w + x] =
                    px[static_cast<std::size_t>(y) * w + (w - 1 - x)];
            }
        }
        const int got = hamming_distance(perceptual_hash(make_bitmap(w, h, px)),
                                         perceptual_hash(make_bitmap(w, h, mirrored)));
        const int want = hamming_distance(reference_dhash(w, h, px),
                                          reference_dhash(w, h, mirrored));
        CHECK(got == want);
    }
}

TEST_CASE("hash is invariant to lossless re-encoding") {
    std::mt19937_64 rng(19);
    const int w = 24, h = 18;
    const auto px = random_pixels(rng, w, h);
    std::vector<std::uint8_t> rgb;
    for (auto v : px) {
        rgb.push_back(v);
        rgb.push_back(v);
        rgb.push_back(v);
    }
    // gray pixels encoded as PGM and PPM decode to the same plane
    const auto from_pgm = decode_image_bytes(encode_pgm(w, h, px));
    const auto from_ppm = decode_image_bytes(encode_ppm(w, h, rgb));
    CHECK(perceptual_hash(from_pgm) == perceptual_hash(from_ppm));
}

TEST_CASE("undecodable image raises") {
    CHECK_THROWS_AS(decode_image_bytes("not an image"), InputError);
    CHECK_THROWS_AS(decode_image_bytes("P5\n4 4\n255\nxx"), InputError);
    CHECK_THROWS_AS(decode_image_bytes(""), InputError);
}

TEST_CASE("pnm parser handles ascii variants and comments") {
    const auto bmp = decode_image_bytes("P2\n# comment\n2 2\n255\n0 64\n128 255\n");
    REQUIRE(bmp.width == 2);
    REQUIRE(bmp.height == 2);
    CHECK(bmp.at(1, 0) == doctest::Approx(64));
    CHECK(bmp.at(1, 1) == doctest::Approx(255));
}

// ---------------------------------------------------------------------------
// dedup

namespace {
ReportEntry entry_with_hash(const std::string& id, std::uint64_t hash) {
    ReportEntry e;
    e.report_id = id;
    e.modality = Modality::radiology;
    e.image_ref = id + ".pgm";
    e.report_text = "report " + id;
    e.phash = hash;
    return e;
}
}  // namespace

TEST_CASE("dedup removes identical hashes") {
    const auto result = dedup_reports({entry_with_hash("a", 42), entry_with_hash("b", 42)}, 2);
    REQUIRE(result.kept.size() == 1);
    CHECK(result.kept[0].report_id == "a");
    REQUIRE(result.duplicates.size() == 1);
    CHECK(result.duplicates.at("b") == "a");
}

TEST_CASE("dedup threshold zero keeps distinct hashes") {
    const auto result = dedup_reports(
        {entry_with_hash("a", 1), entry_with_hash("b", 2), entry_with_hash("c", 4)}, 0);
    CHECK(result.kept.size() == 3);
    CHECK(result.duplicates.empty());
}

TEST_CASE("dedup agrees with the pairwise oracle on planted near-duplicates") {
    std::mt19937_64 rng(23);
    std::uniform_int_distribution<std::uint64_t> hash_dist;
    std::uniform_int_distribution<int> bit_dist(0, 63);
    std::uniform_int_distribution<int> flips_dist(0, 2);

    std::vector<ReportEntry> entries;
    for (int i = 0; i < 80; ++i) {
        entries.push_back(entry_with_hash("r" + std::to_string(100 + i), hash_dist(rng)));
    }
    // plant 20 near-duplicates within distance 2 of an existing entry
    std::uniform_int_distribution<std::size_t> pick(0, entries.size() - 1);
    for (int i = 0; i < 20; ++i) {
        auto hash = entries[pick(rng)].phash;
        const int flips = flips_dist(rng);
        for (int f = 0; f < flips; ++f) hash ^= std::uint64_t{1} << bit_dist(rng);
        entries.push_back(entry_with_hash("dup" + std::to_string(i), hash));
    }

    const int threshold = 2;
    const auto result = dedup_reports(entries, threshold);

    // plainly written first-seen filter
    std::vector<const ReportEntry*> oracle_kept;
    std::map<std::string, std::string> oracle_map;
    for (const auto& e : entries) {
        const ReportEntry* hit = nullptr;
        for (const auto* k : oracle_kept) {
            if (hamming_distance(e.phash, k->phash) <= threshold) {
                hit = k;
                break;
            }
        }
        if (hit) {
            oracle_map[e.report_id] = hit->report_id;
        } else {
            oracle_kept.push_back(&e);
        }
    }

    REQUIRE(result.kept.size() == oracle_kept.size());
    for (std::size_t i = 0; i < oracle_kept.size(); ++i) {
        CHECK(result.kept[i].report_id == oracle_kept[i]->report_id);
    }
    CHECK(result.duplicates == oracle_map);

    // any two kept entries are strictly farther apart than the threshold
    for (std::size_t i = 0; i < result.kept.size(); ++i) {
        for (std::size_t j = i + 1; j < result.kept.size(); ++j) {
            CHECK(hamming_distance(result.kept[i].phash, result.kept[j].phash) > threshold);
        }
    }
}

TEST_CASE("dedup is stable under permutations of far-apart entries") {
    // all pairwise distances above threshold: kept set must not depend on order
    std::vector<ReportEntry> entries;
    for (int i = 0; i < 8; ++i) {
        entries.push_back(entry_with_hash("e" + std::to_string(i),
                                          std::uint64_t{0xffff} << (i * 4)));
    }
    const int threshold = 2;
    auto kept_ids = [&](const std::vector<ReportEntry>& es) {
        std::vector<std::string> ids;
        for (const auto& e : dedup_reports(es, threshold).kept) ids.push_back(e.report_id);
        std::sort(ids.begin(), ids.end());
        return ids;
    };
    const auto baseline = kept_ids(entries);
    std::mt19937_64 rng(29);
    for (int iter = 0; iter < 5; ++iter) {
        std::shuffle(entries.begin(), entries.end(), rng);
        CHECK(kept_ids(entries) == baseline);
    }
}

// ---------------------------------------------------------------------------
// stores

TEST_CASE("chunk store save/load round trip") {
    TempDir dir("chunks");
    ChunkStore store(Corpus::research);
    for (auto& c : chunk_document(Corpus::research, "doc1", std::string(1500, 'q'))) {
        store.append(std::move(c));
    }
    store.seal();
    store.save(dir / "chunks.jsonl");

    const auto loaded = ChunkStore::load(Corpus::research, dir / "chunks.jsonl");
    REQUIRE(loaded.size() == store.size());
    CHECK(loaded.find("doc1:800") != nullptr);
    CHECK(loaded.find("doc1:800")->text == store.find("doc1:800")->text);
}

TEST_CASE("report store lookups") {
    ReportStore store;
    auto e = entry_with_hash("r1", 7);
    store.append(e);
    e = entry_with_hash("r2", 9);
    e.modality = Modality::pathology;
    store.append(e);
    store.seal();

    CHECK(store.find("r1") != nullptr);
    CHECK(store.by_modality(Modality::pathology).size() == 1);
    CHECK(store.by_modality(Modality::ophthalmology).empty());
}
