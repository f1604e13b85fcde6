#include <cmath>

#include "mmtl/data.hpp"

namespace mmtl {

void TournamentSpec::validate() const {
  if (n_classes < 2) throw InvalidArgument("a tournament needs at least two classes");
  if (pca_dim < 1) throw InvalidArgument("pca_dim must be at least 1");
  if (!(train_fraction > 0.0 && train_fraction <= 1.0)) throw InvalidArgument("train_fraction must lie in (0, 1]");
}

std::vector<std::pair<std::size_t, std::size_t>> TournamentSpec::pairs() const {
  std::vector<std::pair<std::size_t, std::size_t>> out;
  for (std::size_t a = 0; a < n_classes; ++a)
    for (std::size_t b = a + 1; b < n_classes; ++b) out.emplace_back(a, b);
  return out;
}

Tournament build_mnist_tournament(const Matrix& features, std::span<const std::uint8_t> labels,
                                  const TournamentSpec& spec) {
  spec.validate();
  if (labels.size() != features.rows())
    throw ShapeMismatch(std::to_string(labels.size()) + " labels for " + std::to_string(features.rows()) + " images");

  std::vector<std::vector<std::size_t>> by_class(spec.n_classes);
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] >= spec.n_classes) throw DataError("label " + std::to_string(labels[i]) + " at index " +
                                                     std::to_string(i) + " is outside the class range");
    by_class[labels[i]].push_back(i);
  }

  PcaResult pca = pca_fit_transform(features, spec.pca_dim);

  std::vector<std::vector<std::size_t>> kept(spec.n_classes);
  std::vector<std::size_t> retained(spec.n_classes);
  for (std::size_t c = 0; c < spec.n_classes; ++c) {
    if (by_class[c].empty()) throw DataError("class " + std::to_string(c) + " has no training points");
    // The epsilon keeps products such as 0.02 * 50 from rounding up to 2.
    const auto n = static_cast<std::size_t>(
        std::ceil(spec.train_fraction * static_cast<double>(by_class[c].size()) - 1e-9));
    retained[c] = std::max<std::size_t>(1, n);
    kept[c].assign(by_class[c].begin(), by_class[c].begin() + static_cast<std::ptrdiff_t>(retained[c]));
  }

  std::vector<TaskSample> tasks;
  for (const auto& [a, b] : spec.pairs()) {
    TaskSample task;
    task.task_id = tasks.size();
    for (std::size_t c : {a, b}) {
      for (std::size_t i : kept[c]) {
        auto r = pca.reduced.row(i);
        task.examples.push_back({Vector(r.begin(), r.end()), c == a ? 1.0 : -1.0});
      }
    }
    tasks.push_back(std::move(task));
  }
  return Tournament{MultiTaskDataset(std::move(tasks), ProblemKind::classification), std::move(pca),
                    std::move(retained)};
}

std::size_t tournament_decode(std::span<const double> scores, const TournamentSpec& spec) {
  const auto pairs = spec.pairs();
  if (scores.size() != pairs.size())
    throw ShapeMismatch("expected " + std::to_string(pairs.size()) + " scores, got " + std::to_string(scores.size()));
  std::vector<std::size_t> votes(spec.n_classes, 0);
  for (std::size_t k = 0; k < pairs.size(); ++k) ++votes[scores[k] >= 0.0 ? pairs[k].first : pairs[k].second];
  std::size_t best = 0;
  for (std::size_t c = 1; c < spec.n_classes; ++c)
    if (votes[c] > votes[best]) best = c;
  return best;
}

}  // namespace mmtl
