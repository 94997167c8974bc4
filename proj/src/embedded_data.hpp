#pragma once

#include <string_view>

// Contents of data/*.tsv, generated into the build tree by CMake.
namespace vtfeed::embedded {
extern const std::string_view kTaxonomy;
extern const std::string_view kAliases;
extern const std::string_view kFiletypeMapping;
}  // namespace vtfeed::embedded
