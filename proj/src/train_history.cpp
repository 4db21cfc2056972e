#include "callo/train.hpp"

#include <cstdio>
#include <map>

namespace callo {

namespace {

std::string fmt(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.10g", v);
    return buf;
}

} // namespace

void TrainHistory::write_tsv(std::ostream& os) const {
    os << "step\tlr\tloss\ttrain_accuracy\tval_accuracy\n";
    std::map<std::size_t, const EvalRecord*> eval_at;
    for (const EvalRecord& e : evals) eval_at[e.step] = &e;
    for (const StepRecord& s : steps) {
        os << s.step << "\t" << fmt(s.lr) << "\t" << fmt(s.loss);
        auto it = eval_at.find(s.step);
        if (it != eval_at.end()) {
            os << "\t" << fmt(it->second->train_accuracy) << "\t";
            if (it->second->has_val) os << fmt(it->second->val_accuracy);
        } else {
            os << "\t\t";
        }
        os << "\n";
    }
    if (aborted) {
        os << "# aborted at step " << abort_step << ": " << abort_reason << "\n";
    }
}

} // namespace callo
