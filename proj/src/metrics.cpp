#include "cdgan/metrics.hpp"

#include <algorithm>
#include <iomanip>
#include <map>

#include "cdgan/errors.hpp"

namespace cdgan {

namespace {

void require_same_shape(const Mask& a, const Mask& b) {
  if (a.h != b.h || a.w != b.w)
    throw ShapeError("mask shape mismatch: " + std::to_string(a.h) + "x" + std::to_string(a.w) +
                     " vs " + std::to_string(b.h) + "x" + std::to_string(b.w));
}

}  // namespace

Confusion confusion(const Mask& pred, const Mask& gt) {
  require_same_shape(pred, gt);
  Confusion c;
  for (size_t i = 0; i < pred.v.size(); ++i) {
    const bool p = pred.v[i] != 0, g = gt.v[i] != 0;
    if (p && g)
      ++c.tp;
    else if (p && !g)
      ++c.fp;
    else if (!p && g)
      ++c.fn;
    else
      ++c.tn;
  }
  return c;
}

double iou(const Mask& pred, const Mask& gt) {
  require_same_shape(pred, gt);
  std::int64_t inter = 0, uni = 0;
  for (size_t i = 0; i < pred.v.size(); ++i) {
    const bool p = pred.v[i] != 0, g = gt.v[i] != 0;
    inter += p && g;
    uni += p || g;
  }
  if (uni == 0) return 1.0;
  return static_cast<double>(inter) / static_cast<double>(uni);
}

std::pair<double, double> precision_recall(const Confusion& c) {
  const double precision =
      (c.tp + c.fp == 0) ? 1.0 : static_cast<double>(c.tp) / static_cast<double>(c.tp + c.fp);
  const double recall =
      (c.tp + c.fn == 0) ? 1.0 : static_cast<double>(c.tp) / static_cast<double>(c.tp + c.fn);
  return {precision, recall};
}

Components connected_components(const Mask& mask) {
  Components out;
  out.labels.assign(mask.v.size(), -1);
  const int h = mask.h, w = mask.w;
  std::vector<std::int32_t> stack;
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      const std::int32_t start = y * w + x;
      if (mask.v[static_cast<size_t>(start)] == 0 || out.labels[static_cast<size_t>(start)] >= 0)
        continue;
      const std::int32_t label = out.count++;
      stack.assign(1, start);
      out.labels[static_cast<size_t>(start)] = label;
      while (!stack.empty()) {
        const std::int32_t p = stack.back();
        stack.pop_back();
        const int py = p / w, px = p % w;
        for (int dy = -1; dy <= 1; ++dy)
          for (int dx = -1; dx <= 1; ++dx) {
            if (dy == 0 && dx == 0) continue;
            const int ny = py + dy, nx = px + dx;
            if (ny < 0 || ny >= h || nx < 0 || nx >= w) continue;
            const std::int32_t q = ny * w + nx;
            if (mask.v[static_cast<size_t>(q)] != 0 && out.labels[static_cast<size_t>(q)] < 0) {
              out.labels[static_cast<size_t>(q)] = label;
              stack.push_back(q);
            }
          }
      }
    }
  return out;
}

ObjectMatch object_pr(const Mask& pred, const Mask& gt, double iou_threshold) {
  require_same_shape(pred, gt);
  if (iou_threshold <= 0.0 || iou_threshold > 1.0)
    throw ShapeError("object_pr threshold must be in (0, 1]");

  const Components cp = connected_components(pred);
  const Components cg = connected_components(gt);

  ObjectMatch m;
  m.pred_components = cp.count;
  m.gt_components = cg.count;

  std::vector<std::int64_t> psize(static_cast<size_t>(cp.count), 0);
  std::vector<std::int64_t> gsize(static_cast<size_t>(cg.count), 0);
  std::vector<std::int32_t> pfirst(static_cast<size_t>(cp.count), -1);
  std::vector<std::int32_t> gfirst(static_cast<size_t>(cg.count), -1);
  std::map<std::pair<std::int32_t, std::int32_t>, std::int64_t> inter;
  for (size_t i = 0; i < pred.v.size(); ++i) {
    const std::int32_t pl = cp.labels[i], gl = cg.labels[i];
    if (pl >= 0) {
      ++psize[static_cast<size_t>(pl)];
      if (pfirst[static_cast<size_t>(pl)] < 0) pfirst[static_cast<size_t>(pl)] = static_cast<std::int32_t>(i);
    }
    if (gl >= 0) {
      ++gsize[static_cast<size_t>(gl)];
      if (gfirst[static_cast<size_t>(gl)] < 0) gfirst[static_cast<size_t>(gl)] = static_cast<std::int32_t>(i);
    }
    if (pl >= 0 && gl >= 0) ++inter[{pl, gl}];
  }

  struct Pair {
    double iou;
    std::int32_t pfirst, gfirst;
    std::int32_t p, g;
  };
  std::vector<Pair> pairs;
  for (const auto& [key, cnt] : inter) {
    const auto [pl, gl] = key;
    const double u = static_cast<double>(psize[static_cast<size_t>(pl)] +
                                         gsize[static_cast<size_t>(gl)] - cnt);
    const double v = static_cast<double>(cnt) / u;
    if (v >= iou_threshold)
      pairs.push_back({v, pfirst[static_cast<size_t>(pl)], gfirst[static_cast<size_t>(gl)], pl, gl});
  }
  std::sort(pairs.begin(), pairs.end(), [](const Pair& a, const Pair& b) {
    if (a.iou != b.iou) return a.iou > b.iou;
    if (a.pfirst != b.pfirst) return a.pfirst < b.pfirst;
    return a.gfirst < b.gfirst;
  });

  std::vector<bool> pused(static_cast<size_t>(cp.count), false);
  std::vector<bool> gused(static_cast<size_t>(cg.count), false);
  for (const Pair& pr : pairs) {
    if (pused[static_cast<size_t>(pr.p)] || gused[static_cast<size_t>(pr.g)]) continue;
    pused[static_cast<size_t>(pr.p)] = true;
    gused[static_cast<size_t>(pr.g)] = true;
    ++m.matched;
  }

  m.precision = (cp.count == 0) ? 1.0 : static_cast<double>(m.matched) / cp.count;
  m.recall = (cg.count == 0) ? 1.0 : static_cast<double>(m.matched) / cg.count;
  return m;
}

EvalReport evaluate_records(const PredictFn& predict, const std::vector<SampleRecord>& records,
                            double iou_threshold) {
  if (records.empty()) throw DataError("evaluate_records: empty record set");
  EvalReport report;
  double iou_sum = 0.0;
  std::int64_t ok_count = 0;
  for (const SampleRecord& rec : records) {
    SampleEval row;
    row.id = rec.id;
    try {
      const Mask pred = predict(rec);
      row.iou = iou(pred, rec.mask);
      row.conf = confusion(pred, rec.mask);
      row.objects = object_pr(pred, rec.mask, iou_threshold);
    } catch (const std::exception& e) {
      row.ok = false;
      row.error = e.what();
    }
    if (row.ok) {
      iou_sum += row.iou;
      ++ok_count;
      report.total += row.conf;
      report.matched += row.objects.matched;
      report.pred_components += row.objects.pred_components;
      report.gt_components += row.objects.gt_components;
    }
    report.rows.push_back(std::move(row));
  }
  if (ok_count > 0) report.mean_iou = iou_sum / static_cast<double>(ok_count);
  const auto [p, r] = precision_recall(report.total);
  report.pixel_precision = p;
  report.pixel_recall = r;
  report.object_precision = (report.pred_components == 0)
                                ? 1.0
                                : static_cast<double>(report.matched) / report.pred_components;
  report.object_recall = (report.gt_components == 0)
                             ? 1.0
                             : static_cast<double>(report.matched) / report.gt_components;
  return report;
}

void write_report_tsv(std::ostream& os, const EvalReport& report) {
  os << "id\tiou\tpixel_precision\tpixel_recall\tobject_precision\tobject_recall\tstatus\n";
  os << std::fixed << std::setprecision(6);
  for (const SampleEval& row : report.rows) {
    if (!row.ok) {
      os << row.id << "\t0\t0\t0\t0\t0\terror: " << row.error << "\n";
      continue;
    }
    const auto [p, r] = precision_recall(row.conf);
    os << row.id << "\t" << row.iou << "\t" << p << "\t" << r << "\t" << row.objects.precision
       << "\t" << row.objects.recall << "\tok\n";
  }
  os << "ALL\t" << report.mean_iou << "\t" << report.pixel_precision << "\t"
     << report.pixel_recall << "\t" << report.object_precision << "\t" << report.object_recall
     << "\tok\n";
}

}  // namespace cdgan
