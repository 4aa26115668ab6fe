#ifndef CSPACE_STEMMER_HPP
#define CSPACE_STEMMER_HPP

#include <string>
#include <string_view>

namespace cspace {

/// Porter (1980) suffix stripping for a lowercase ASCII word. Words shorter
/// than three characters and words containing non-ASCII bytes are returned as is.
std::string porter_stem(std::string_view word);

}  // namespace cspace

#endif
