#pragma once

#include <optional>
#include <string>
#include <vector>

#include "lesen/tensor.hpp"

namespace lesen {

struct EvalReport {
    struct Row {
        std::string sample_id;
        double dsc = 0.0;
        std::optional<double> asd;  // absent when either mask is empty
    };
    std::vector<Row> rows;
    int asd_undefined_count = 0;

    double mean_dsc() const;
    double std_dsc() const;
    double mean_asd() const;
    double std_asd() const;
};

// 2|P∩G| / (|P|+|G|); 1 when both masks are empty, 0 when exactly one is.
double dsc(const Tensor& pred, const Tensor& gt);

// Average symmetric surface distance over 4-connectivity boundaries with
// anisotropic spacing. Throws when either mask is empty.
double asd(const Tensor& pred, const Tensor& gt, double spacing_y = 1.0, double spacing_x = 1.0);

// Foreground iff foreground probability strictly exceeds 0.5.
Tensor binarize(const Tensor& prob_map);

// Tab-separated: one row per sample, then mean and std rows.
void write_eval_report(const EvalReport& report, const std::string& path);

}  // namespace lesen
