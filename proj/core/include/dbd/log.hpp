#pragma once

#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>

#include "dbd/errors.hpp"

namespace dbd {

/// Line logger for run directories. Silent by default; optionally echoes to
/// stdout. Timing and progress go here, never into metrics files.
class Logger {
public:
  Logger() = default;
  explicit Logger(const std::filesystem::path& path, bool echo = false) : echo_(echo) {
    file_.open(path, std::ios::app);
    if (!file_) throw IoError("cannot open log", path.string());
  }

  void line(const std::string& text) {
    if (file_.is_open()) file_ << text << "\n" << std::flush;
    if (echo_) std::cout << text << "\n";
  }

private:
  std::ofstream file_;
  bool echo_ = false;
};

}  // namespace dbd
