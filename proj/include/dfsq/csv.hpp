#pragma once

#include <cstdio>
#include <fstream>
#include <initializer_list>
#include <string>
#include <vector>

#include "dfsq/common.hpp"

namespace dfsq {

/// CSV with '.' decimal separator, 17 significant digits, LF endings, so that
/// identical runs produce byte-identical files.
class CsvWriter {
public:
    explicit CsvWriter(const std::string& path)
        : out_(path, std::ios::binary) {
        if (!out_) throw ConfigError("cannot open output file: " + path);
    }

    void header(std::initializer_list<const char*> names) {
        bool first = true;
        for (const char* n : names) {
            if (!first) out_ << ',';
            out_ << n;
            first = false;
        }
        out_ << '\n';
    }

    static std::string num(double x) {
        char buf[40];
        std::snprintf(buf, sizeof(buf), "%.17g", x);
        return buf;
    }

    void row(const std::vector<std::string>& cells) {
        for (std::size_t i = 0; i < cells.size(); ++i) {
            if (i) out_ << ',';
            out_ << cells[i];
        }
        out_ << '\n';
    }

    void row(const std::vector<double>& cells) {
        for (std::size_t i = 0; i < cells.size(); ++i) {
            if (i) out_ << ',';
            out_ << num(cells[i]);
        }
        out_ << '\n';
    }

private:
    std::ofstream out_;
};

}  // namespace dfsq
