#include "meltpool/evaluate.hpp"

#include <algorithm>
#include <atomic>
#include <mutex>
#include <thread>

namespace meltpool {

std::vector<MetricsRecord> evaluate_dataset(const Dataset& dataset, const Checkpoint& mt,
                                            const Checkpoint& m, bool include_train,
                                            bool include_val, unsigned workers) {
    const SurrogateConfig cfg = config_of_checkpoint(mt);
    const MaterialProperties mat = MaterialProperties::by_name(cfg.material);

    std::vector<const SampleRecord*> recs;
    for (const auto& r : dataset.records) {
        if (r.split == Split::Train && !include_train) continue;
        if (r.split == Split::Val && !include_val) continue;
        recs.push_back(&r);
    }
    std::vector<MetricsRecord> out(recs.size());
    if (workers < 1) workers = 1;

    std::atomic<std::size_t> next{0};
    std::exception_ptr err;
    std::mutex err_mu;
    auto work = [&] {
        try {
            Network mt_net = mt.instantiate();
            Network m_net = m.instantiate();
            const SurrogateConfig m_cfg = config_of_checkpoint(m);
            for (;;) {
                const std::size_t i = next.fetch_add(1);
                if (i >= recs.size()) return;
                const SampleRecord& r = *recs[i];
                Tensor pred = forward_point(mt_net, cfg, r.point, Mode::Eval);
                Tensor mask = forward_point(m_net, m_cfg, r.point, Mode::Eval);
                for (std::size_t k = 0; k < pred.numel(); ++k)
                    if (mask[k] >= 0.5) pred[k] = 0.0;

                std::vector<double> truth_norm(r.field.begin(), r.field.end());
                const double rmse = relative_rmse(pred.vec(), truth_norm);

                std::vector<double> pred_kelvin = pred.vec();
                for (double& v : pred_kelvin) v = cfg.norm.denormalize(v);
                std::vector<double> truth_kelvin = truth_norm;
                for (double& v : truth_kelvin) v = cfg.norm.denormalize(v);
                const auto mp = melt_mask(pred_kelvin, mat);
                const auto mtr = melt_mask(truth_kelvin, mat);

                MetricsRecord rec;
                rec.case_id = r.case_id;
                rec.frame_index = r.frame_index;
                rec.power_w = r.point.power_w;
                rec.velocity_mm_s = r.point.velocity_mm_s;
                rec.time_us = r.point.time_us;
                rec.rmse_pct = rmse;
                rec.iou_pct = iou(mp, mtr);
                for (std::size_t k = 0; k < mp.size(); ++k) {
                    rec.melt_pred += mp[k] != 0;
                    rec.melt_truth += mtr[k] != 0;
                    rec.melt_intersection += (mp[k] != 0) && (mtr[k] != 0);
                    rec.melt_union += (mp[k] != 0) || (mtr[k] != 0);
                }
                out[i] = std::move(rec);
            }
        } catch (...) {
            std::lock_guard<std::mutex> lk(err_mu);
            if (!err) err = std::current_exception();
        }
    };
    if (workers == 1) {
        work();
    } else {
        std::vector<std::thread> pool;
        for (unsigned w = 0; w < workers; ++w) pool.emplace_back(work);
        for (auto& t : pool) t.join();
    }
    if (err) std::rethrow_exception(err);

    std::sort(out.begin(), out.end(), [](const MetricsRecord& a, const MetricsRecord& b) {
        return a.case_id != b.case_id ? a.case_id < b.case_id : a.frame_index < b.frame_index;
    });
    return out;
}

}  // namespace meltpool
