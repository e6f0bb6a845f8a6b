#pragma once

#include <cstdint>
#include <functional>
#include <ostream>
#include <string>
#include <utility>
#include <vector>

#include "cdgan/data.hpp"
#include "cdgan/mask.hpp"

namespace cdgan {

struct Confusion {
  std::int64_t tp = 0, fp = 0, fn = 0, tn = 0;

  Confusion& operator+=(const Confusion& o) {
    tp += o.tp;
    fp += o.fp;
    fn += o.fn;
    tn += o.tn;
    return *this;
  }
  std::int64_t total() const { return tp + fp + fn + tn; }
};

Confusion confusion(const Mask& pred, const Mask& gt);

// |pred & gt| / |pred | gt|, defined as 1.0 when both masks are empty.
double iou(const Mask& pred, const Mask& gt);

// (tp/(tp+fp), tp/(tp+fn)); an empty denominator yields 1.0 by convention.
std::pair<double, double> precision_recall(const Confusion& c);

// 8-connectivity labeling; labels are assigned in scanline first-encounter
// order. labels[i] is the 0-based component id or -1 for background.
struct Components {
  int count = 0;
  std::vector<std::int32_t> labels;
};

Components connected_components(const Mask& mask);

// Greedy one-to-one matching of predicted to ground-truth components in
// descending pairwise-IoU order (ties broken by first-encountered pixel, so
// the result is independent of labeling). A pair matches iff IoU >= threshold.
struct ObjectMatch {
  int matched = 0;
  int pred_components = 0;
  int gt_components = 0;
  double precision = 1.0;
  double recall = 1.0;
};

ObjectMatch object_pr(const Mask& pred, const Mask& gt, double iou_threshold = 0.5);

struct SampleEval {
  std::string id;
  bool ok = true;
  std::string error;
  double iou = 0.0;
  Confusion conf;
  ObjectMatch objects;
};

struct EvalReport {
  double mean_iou = 0.0;
  double pixel_precision = 1.0;
  double pixel_recall = 1.0;
  double object_precision = 1.0;
  double object_recall = 1.0;
  Confusion total;
  std::int64_t matched = 0, pred_components = 0, gt_components = 0;
  std::vector<SampleEval> rows;
};

using PredictFn = std::function<Mask(const SampleRecord&)>;

// Runs predict on every record and aggregates: pixel confusion summed over
// the set, IoU averaged per sample, object counts summed. A record whose
// prediction throws is reported in its row and excluded from the aggregates.
EvalReport evaluate_records(const PredictFn& predict, const std::vector<SampleRecord>& records,
                            double iou_threshold = 0.5);

// One header row, one row per sample, one aggregate row (id "ALL").
void write_report_tsv(std::ostream& os, const EvalReport& report);

}  // namespace cdgan
