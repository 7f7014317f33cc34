#pragma once

#include "dqlens/error.hpp"

#include <gtest/gtest.h>

#include <atomic>
#include <filesystem>
#include <string>
#include <unistd.h>

// Asserts that `stmt` throws dqlens::Error with the given code.
#define EXPECT_DQ_ERROR(stmt, expected_code)                                              \
  do {                                                                                    \
    try {                                                                                 \
      stmt;                                                                               \
      ADD_FAILURE() << "expected " << dqlens::to_string(expected_code) << ", no throw";   \
    } catch (const dqlens::Error& e_) {                                                   \
      EXPECT_EQ(dqlens::to_string(e_.code()), dqlens::to_string(expected_code)) << e_.what(); \
    }                                                                                     \
  } while (0)

// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  TempDir() {
    static std::atomic<int> counter{0};
    path_ = std::filesystem::temp_directory_path() /
            ("dqlens-test-" + std::to_string(::getpid()) + "-" + std::to_string(counter++));
    std::filesystem::remove_all(path_);
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  const std::filesystem::path& path() const { return path_; }

 private:
  std::filesystem::path path_;
};
