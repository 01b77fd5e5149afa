#include <gtest/gtest.h>

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

#include "layoutforge/dataio.hpp"
#include "layoutforge/rules.hpp"

using namespace layoutforge;
using nlohmann::json;

namespace {

json node(double l, double t, double r, double b, const std::string& label = "", json children = json::array()) {
  json n = {{"bounds", {l, t, r, b}}, {"children", children}};
  if (!label.empty()) n["componentLabel"] = label;
  return n;
}

std::filesystem::path scratch_dir(const std::string& name) {
  auto p = std::filesystem::temp_directory_path() / ("layoutforge_dataio_" + name);
  std::filesystem::remove_all(p);
  std::filesystem::create_directories(p);
  return p;
}

}  // namespace

TEST(ParseRico, TwoLeavesGiveTwoComponents) {
  const json root = node(0, 0, 1440, 2560, "", {node(0, 0, 720, 200, "Text"), node(0, 400, 1440, 800, "Image")});
  const auto r = parse_rico(root, 1440, 2560);
  ASSERT_EQ(r.layout.size(), 2u);
  const auto& a = r.layout.components[0];
  EXPECT_EQ(a.type, ComponentType::text);
  EXPECT_DOUBLE_EQ(a.cx, 0.25);
  EXPECT_DOUBLE_EQ(a.w, 0.5);
  EXPECT_DOUBLE_EQ(a.h, 200.0 / 2560.0);
  EXPECT_EQ(r.layout.components[1].type, ComponentType::image);
  EXPECT_TRUE(is_valid(r.layout));
}

TEST(ParseRico, ChildlessRootIsItsOwnLeaf) {
  const auto r = parse_rico(node(0, 0, 1440, 2560, "Background Image"), 1440, 2560);
  ASSERT_EQ(r.layout.size(), 1u);
  EXPECT_EQ(r.layout.components[0].type, ComponentType::background);
}

TEST(ParseRico, LabelTable) {
  const auto table = default_label_map();
  EXPECT_EQ(map_label(table, "TextButton"), ComponentType::button);
  EXPECT_EQ(map_label(table, "Zxq"), ComponentType::other);
  EXPECT_EQ(map_label(table, "android.widget.ImageView"), ComponentType::image);
  const json root = node(0, 0, 100, 100, "", {node(0, 0, 50, 50, "TextButton"), node(50, 50, 100, 100, "Zxq")});
  const auto r = parse_rico(root, 100, 100);
  ASSERT_EQ(r.layout.size(), 2u);
  EXPECT_EQ(r.layout.components[0].type, ComponentType::button);
  EXPECT_EQ(r.layout.components[1].type, ComponentType::other);
}

TEST(ParseRico, ShippedTableMatchesBuiltIn) {
  EXPECT_EQ(load_label_map(LAYOUTFORGE_DATA "/label_map.json"), default_label_map());
}

TEST(ParseRico, ZeroAreaRootIsEmpty) {
  const auto r = parse_rico(node(0, 0, 0, 2560, "", {node(0, 0, 10, 10, "Text")}), 1440, 2560);
  EXPECT_TRUE(r.layout.components.empty());
}

TEST(ParseRico, MalformedJsonNamesPath) {
  try {
    (void)parse_rico_text("{\"bounds\": [0, 0, 1", 1440, 2560, "screens/17.json");
    FAIL();
  } catch (const DataError& e) {
    EXPECT_EQ(e.field(), "screens/17.json");
    EXPECT_NE(std::string(e.what()).find("screens/17.json"), std::string::npos);
  }
}

TEST(ParseRico, MalformedNodesDroppedWithWarning) {
  json bad = {{"bounds", {1, 2}}};
  const json root = node(0, 0, 100, 100, "", {bad, node(10, 10, 10, 50, "Text"), node(0, 0, 40, 40, "Icon")});
  const auto r = parse_rico(root, 100, 100);
  ASSERT_EQ(r.layout.size(), 1u);
  EXPECT_EQ(r.layout.components[0].type, ComponentType::icon);
  EXPECT_EQ(r.warnings.size(), 2u);
}

TEST(ParseRico, SwappedAndOversizedBoundsSanitized) {
  const auto r = parse_rico(node(0, 0, 100, 100, "", {node(80, 90, -20, 10, "Image")}), 100, 100);
  ASSERT_EQ(r.layout.size(), 1u);
  const auto& c = r.layout.components[0];
  EXPECT_DOUBLE_EQ(c.left(), 0.0);
  EXPECT_DOUBLE_EQ(c.right(), 0.8);
  EXPECT_DOUBLE_EQ(c.top(), 0.1);
  EXPECT_DOUBLE_EQ(c.bottom(), 0.9);
}

TEST(ParseRico, ColorFieldOrTypeDefault) {
  json a = node(0, 0, 50, 50, "Button");
  a["color"] = "#FF8000";
  json b = node(50, 50, 100, 100, "Button");
  b["color"] = {0, 255, 0};
  const auto r = parse_rico(node(0, 0, 100, 100, "", {a, b, node(0, 60, 10, 70, "Button")}), 100, 100);
  ASSERT_EQ(r.layout.size(), 3u);
  EXPECT_EQ(r.layout.components[0].color, (Color{1.0, 128.0 / 255.0, 0.0}));
  EXPECT_EQ(r.layout.components[1].color, (Color{0.0, 1.0, 0.0}));
  EXPECT_EQ(r.layout.components[2].color, default_type_color(ComponentType::button));
}

TEST(ParseRico, KeepsLargestLeavesInDocumentOrder) {
  json children = json::array();
  for (int i = 0; i < 20; ++i) children.push_back(node(0, 5.0 * i, 1.0 + i, 5.0 * i + 4, "Text"));
  const auto r = parse_rico(node(0, 0, 100, 100, "", children), 100, 100);
  ASSERT_EQ(r.layout.size(), static_cast<std::size_t>(kMaxComponents));
  for (int k = 0; k < kMaxComponents; ++k) EXPECT_DOUBLE_EQ(r.layout.components[k].w, (5.0 + k) / 100.0);
}

TEST(ParseRico, NestedDepthFirstOrder) {
  const json root = node(0, 0, 100, 100, "",
                         {node(0, 0, 100, 50, "", {node(0, 0, 10, 10, "Icon"), node(20, 0, 30, 10, "Text")}),
                          node(0, 60, 100, 100, "Input")});
  const auto r = parse_rico(root, 100, 100);
  ASSERT_EQ(r.layout.size(), 3u);
  EXPECT_EQ(r.layout.components[0].type, ComponentType::icon);
  EXPECT_EQ(r.layout.components[1].type, ComponentType::text);
  EXPECT_EQ(r.layout.components[2].type, ComponentType::input);
}

TEST(ParseRico, TotalOverRandomDocuments) {
  Rng rng(21);
  for (int k = 0; k < 200; ++k) {
    json children = json::array();
    const int n = static_cast<int>(rng.below(25));
    for (int i = 0; i < n; ++i) {
      children.push_back(node(rng.uniform(-50, 200), rng.uniform(-50, 200), rng.uniform(-50, 200),
                              rng.uniform(-50, 200), rng.bernoulli(0.5) ? "Text" : "Foo"));
    }
    const auto r = parse_rico(node(0, 0, 150, 150, "", children), 150, 150);
    EXPECT_TRUE(is_valid(r.layout));
    EXPECT_LE(r.layout.size(), static_cast<std::size_t>(kMaxComponents));
  }
}

TEST(LoadRicoDir, PathOrderAndWarnings) {
  const auto dir = scratch_dir("rico");
  std::ofstream(dir / "b.json") << node(0, 0, 100, 100, "", {node(0, 0, 50, 50, "Icon")}).dump();
  std::ofstream(dir / "a.json") << node(0, 0, 100, 100, "Image").dump();
  std::ofstream(dir / "notes.txt") << "ignored";
  std::vector<std::string> warnings;
  const auto corpus = load_rico_dir(dir.string(), 100, 100, default_label_map(), &warnings);
  ASSERT_EQ(corpus.items.size(), 2u);
  EXPECT_EQ(corpus.items[0].layout.components[0].type, ComponentType::image);
  EXPECT_EQ(corpus.items[1].layout.components[0].type, ComponentType::icon);
  EXPECT_THROW(load_rico_dir((dir / "missing").string(), 100, 100, default_label_map(), nullptr), DataError);
}

TEST(LabelMap, BadFileErrors) {
  const auto dir = scratch_dir("labels");
  std::ofstream(dir / "bad.json") << "{\"Foo\": \"widget\"}";
  try {
    (void)load_label_map((dir / "bad.json").string());
    FAIL();
  } catch (const DataError& e) {
    EXPECT_EQ(e.field(), "paths.mapping.Foo");
  }
  EXPECT_THROW(load_label_map((dir / "none.json").string()), DataError);
}

TEST(Synth, Deterministic) {
  EXPECT_EQ(corpus_to_jsonl(synth_corpus(50, 3)), corpus_to_jsonl(synth_corpus(50, 3)));
  EXPECT_NE(corpus_to_jsonl(synth_corpus(50, 3)), corpus_to_jsonl(synth_corpus(50, 4)));
}

TEST(Synth, PrefixStable) {
  const auto a = synth_corpus(20, 9);
  const auto b = synth_corpus(40, 9);
  for (std::size_t i = 0; i < a.items.size(); ++i) EXPECT_EQ(a.items[i].layout, b.items[i].layout);
}

TEST(Synth, EveryItemValidAndSpacingClean) {
  const auto corpus = synth_corpus(2000, 7);
  for (const auto& item : corpus.items) {
    ASSERT_TRUE(is_valid(item.layout)) << item.source;
    ASSERT_EQ(spacing_violations(item.layout), 0) << item.source;
  }
}

TEST(Synth, AlignmentAtLeastHalf) {
  const auto corpus = synth_corpus(2000, 7);
  for (const auto& item : corpus.items) {
    if (item.source == "gallery") continue;
    ASSERT_GE(alignment_score(item.layout), 0.5) << item.source;
  }
}

// A 2x3 tile grid under a full-width toolbar shares edges only within a row,
// within a column and along the outer sides: 33 of 126 relations.
TEST(Synth, GalleryAlignmentIsGridBound) {
  const auto corpus = synth_corpus(400, 7);
  for (const auto& item : corpus.items) {
    if (item.source != "gallery") continue;
    ASSERT_EQ(rule_participants(item.layout).size(), 7u);
    EXPECT_NEAR(alignment_score(item.layout), 33.0 / 126.0, 1e-12);
  }
}

TEST(Synth, TemplateCensus) {
  const auto corpus = synth_corpus(2000, 7);
  std::map<std::string, int> counts;
  for (const auto& item : corpus.items) ++counts[item.source];
  ASSERT_EQ(counts.size(), 4u);
  for (const auto& [name, c] : counts) {
    EXPECT_GE(c, 450) << name;
    EXPECT_LE(c, 550) << name;
  }
}

TEST(Synth, ConditionCarriesKeywordsAndSketch) {
  const auto corpus = synth_corpus(100, 2);
  for (const auto& item : corpus.items) {
    const auto words = item.condition.keyword_list();
    const bool has_theme = std::find(words.begin(), words.end(), "dark") != words.end() ||
                           std::find(words.begin(), words.end(), "light") != words.end();
    EXPECT_TRUE(has_theme);
    EXPECT_EQ(item.condition.sketch, sketch_from_layout(item.layout));
    if (item.source == "login") EXPECT_NE(std::find(words.begin(), words.end(), "login"), words.end());
    if (item.source == "gallery") EXPECT_NE(std::find(words.begin(), words.end(), "gallery"), words.end());
  }
}

TEST(Synth, RejectsEmpty) { EXPECT_THROW(synth_corpus(0, 1), DataError); }

TEST(Sketch, TopHalfBox) {
  Layout l;
  l.components.push_back({ComponentType::image, 0.5, 0.25, 1.0, 0.5, {0, 0, 0}, true});
  const auto s = sketch_from_layout(l);
  for (int i = 0; i < kSketchCells; ++i) EXPECT_EQ(s[static_cast<std::size_t>(i)], i < 32 ? 1.0 : 0.0) << i;
}

TEST(Sketch, BackgroundIgnored) {
  Layout l;
  l.components.push_back({ComponentType::background, 0.5, 0.5, 1.0, 1.0, {0, 0, 0}, true});
  const auto s = sketch_from_layout(l);
  EXPECT_TRUE(std::all_of(s.begin(), s.end(), [](double v) { return v == 0.0; }));
}

TEST(Split, EightTwo) {
  const auto c = split(synth_corpus(10, 1), 0.8, 5);
  EXPECT_EQ(c.train.size(), 8u);
  EXPECT_EQ(c.validation.size(), 2u);
}

TEST(Split, SameSeedSameSplit) {
  const auto a = split(synth_corpus(30, 1), 0.7, 5);
  const auto b = split(synth_corpus(30, 1), 0.7, 5);
  EXPECT_EQ(a.train, b.train);
  EXPECT_EQ(a.validation, b.validation);
}

TEST(Split, Partition) {
  Rng rng(4);
  for (int k = 0; k < 50; ++k) {
    const std::size_t n = 2 + rng.below(60);
    const double ratio = rng.uniform(0.3, 0.7);
    const auto c = split(synth_corpus(n, k), ratio, rng.below(1000));
    std::set<std::size_t> all(c.train.begin(), c.train.end());
    for (auto i : c.validation) EXPECT_TRUE(all.insert(i).second);
    EXPECT_EQ(all.size(), n);
    EXPECT_EQ(*all.rbegin(), n - 1);
  }
}

TEST(Split, DegenerateSizes) {
  EXPECT_THROW(split(synth_corpus(1, 1), 0.5, 0), DataError);
  EXPECT_THROW(split(synth_corpus(10, 1), 0.01, 0), DataError);
  EXPECT_THROW(split(synth_corpus(10, 1), 0.99, 0), DataError);
  EXPECT_THROW(split(synth_corpus(10, 1), 1.0, 0), DataError);
  EXPECT_THROW(split(synth_corpus(10, 1), 0.0, 0), DataError);
}

TEST(Jsonl, RoundTrip) {
  const auto corpus = synth_corpus(40, 11);
  std::istringstream in(corpus_to_jsonl(corpus));
  const auto back = corpus_from_jsonl(in);
  ASSERT_EQ(back.items.size(), corpus.items.size());
  for (std::size_t i = 0; i < corpus.items.size(); ++i) {
    EXPECT_EQ(back.items[i].layout, corpus.items[i].layout);
    EXPECT_EQ(back.items[i].condition, corpus.items[i].condition);
    EXPECT_EQ(back.items[i].source, corpus.items[i].source);
  }
  EXPECT_EQ(back.provenance, corpus.provenance);
  EXPECT_EQ(back.provenance["seed"], 11);
}

TEST(Jsonl, FileRoundTrip) {
  const auto dir = scratch_dir("jsonl");
  const auto corpus = synth_corpus(12, 2);
  save_corpus(corpus, (dir / "c.jsonl").string());
  EXPECT_EQ(corpus_to_jsonl(load_corpus((dir / "c.jsonl").string())), corpus_to_jsonl(corpus));
  EXPECT_THROW(load_corpus((dir / "none.jsonl").string()), DataError);
}

TEST(Jsonl, BadLinesNameLocation) {
  std::istringstream not_corpus("{\"format\":\"other\"}\n");
  EXPECT_THROW(corpus_from_jsonl(not_corpus), DataError);
  std::istringstream empty("");
  EXPECT_THROW(corpus_from_jsonl(empty), DataError);

  auto text = corpus_to_jsonl(synth_corpus(2, 1));
  const auto pos = text.find("\"cx\":");
  text.replace(pos, 5, "\"cx\":7,\"zz\":");
  std::istringstream bad(text);
  try {
    (void)corpus_from_jsonl(bad, "c.jsonl");
    FAIL();
  } catch (const DataError& e) {
    EXPECT_NE(std::string(e.what()).find("c.jsonl:2"), std::string::npos) << e.what();
  }
}
