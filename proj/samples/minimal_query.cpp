// Renders a tiny procedural dataset in memory, indexes it and runs one
// feedback session with a category oracle standing in for the user.

#include <cstdio>

#include "segcbir/evaluation.hpp"
#include "segcbir/index_store.hpp"
#include "segcbir/retrieval_engine.hpp"
#include "segcbir/synthetic.hpp"

int main() {
  using namespace segcbir;
  synthetic::DatasetConfig data{.categories = 4, .per_category = 12, .size = 96, .seed = 7};

  FeatureIndex index;
  index.meta.seed = 1;
  for (std::size_t c = 0; c < data.categories; ++c) {
    index.categories.push_back(synthetic::category_name(c));
    for (std::size_t i = 0; i < data.per_category; ++i) {
      const auto id = static_cast<ImageId>(index.images.size());
      const auto f = analyze_image(synthetic::render(c, i, data).to_hsv(), IndexBuildConfig{},
                                   image_seed(index.meta.seed, id), id);
      ImageRecord rec;
      rec.id = id;
      rec.category = static_cast<std::uint32_t>(c);
      rec.path = index.categories.back() + "/" + std::to_string(i) + ".png";
      rec.block_count = f.block_count;
      rec.global = f.global;
      rec.segments = f.segments;
      rec.segments.image_id = id;
      index.images.push_back(std::move(rec));
    }
  }
  fit_normalizations(index);

  const SearchIndex search(index);
  const Oracle oracle = Oracle::from_search(search);
  SessionConfig config;
  config.scope = 10;
  config.total_iterations = 4;

  const ImageId query = 5;
  const Transcript t = run_session(search, query, Scheme::WsComb, config, oracle.source(query));
  for (const auto& m : session_metrics(t, search.category_size(search.category(query)), config.scope,
                                        config.total_iterations)) {
    std::printf("iteration %zu: RE %.1f%%  FD %.1f%%\n", m.iteration, m.re, m.fd);
  }
}
