#include <cstdio>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "callo/error.hpp"
#include "common.hpp"

namespace cli {

using namespace callo;

namespace {

std::vector<std::string> split_tabs(const std::string& line) {
    std::vector<std::string> out;
    std::istringstream is(line);
    std::string tok;
    while (std::getline(is, tok, '\t')) out.push_back(tok);
    return out;
}

} // namespace

int run_report(const ReportOptions& opt) {
    if (opt.history.empty() && opt.knn.empty()) {
        throw ConfigError("report: pass --history and/or --knn");
    }

    if (!opt.history.empty()) {
        std::ifstream in(opt.history);
        if (!in) throw DataError("report: cannot open " + opt.history);
        std::string line;
        std::getline(in, line); // header
        if (line.rfind("step\tlr\tloss", 0) != 0) {
            throw DataError("report: " + opt.history + " is not a training history log");
        }
        std::size_t steps = 0;
        double final_loss = 0.0, min_loss = 1e300, best_val = -1.0, final_val = -1.0;
        while (std::getline(in, line)) {
            if (line.empty() || line[0] == '#') continue;
            auto cols = split_tabs(line);
            if (cols.size() < 3) continue;
            ++steps;
            final_loss = std::stod(cols[2]);
            min_loss = std::min(min_loss, final_loss);
            if (cols.size() >= 5 && !cols[4].empty()) {
                final_val = std::stod(cols[4]);
                best_val = std::max(best_val, final_val);
            }
        }
        std::printf("history: %s\n  steps %zu\n  final loss %.6f\n  min loss %.6f\n",
                    opt.history.c_str(), steps, final_loss, min_loss);
        if (best_val >= 0.0) {
            std::printf("  best val accuracy %.4f\n  final val accuracy %.4f\n", best_val,
                        final_val);
        }
    }

    if (!opt.knn.empty()) {
        std::ifstream in(opt.knn);
        if (!in) throw DataError("report: cannot open " + opt.knn);
        std::string line;
        std::getline(in, line);
        if (line.rfind("k\t", 0) != 0) {
            throw DataError("report: " + opt.knn + " is not a knn report");
        }
        std::printf("knn report: %s\n  %s\n", opt.knn.c_str(), line.c_str());
        while (std::getline(in, line)) {
            if (!line.empty()) std::printf("  %s\n", line.c_str());
        }
    }
    return 0;
}

} // namespace cli
