/*!
  \file random.hpp
  \brief Seeded randomness with platform-independent draws

  `std::uniform_*_distribution` results differ between standard libraries,
  so draws are derived directly from `std::mt19937_64` output.
*/

#pragma once

#include <cmath>
#include <cstdint>
#include <random>

namespace mimic
{

/*! \brief Derives an independent seed for a named sub-stream (splitmix64 finalizer). */
inline uint64_t derive_seed( uint64_t seed, uint64_t stream )
{
  uint64_t z = seed + 0x9e3779b97f4a7c15ull * ( stream + 1 );
  z = ( z ^ ( z >> 30 ) ) * 0xbf58476d1ce4e5b9ull;
  z = ( z ^ ( z >> 27 ) ) * 0x94d049bb133111ebull;
  return z ^ ( z >> 31 );
}

class random_source
{
public:
  explicit random_source( uint64_t seed ) : engine_( seed ) {}

  uint64_t bits() { return engine_(); }

  /*! \brief Uniform in [0, 1). */
  double uniform() { return static_cast<double>( engine_() >> 11 ) * 0x1.0p-53; }

  /*! \brief Uniform integer in [0, n). */
  uint64_t below( uint64_t n ) { return n ? static_cast<uint64_t>( uniform() * static_cast<double>( n ) ) % n : 0; }

  /*! \brief Standard normal via Box-Muller. */
  double normal()
  {
    double u1 = uniform();
    while ( u1 <= 0.0 )
      u1 = uniform();
    double const u2 = uniform();
    return std::sqrt( -2.0 * std::log( u1 ) ) * std::cos( 6.283185307179586 * u2 );
  }

  /*! \brief Standard Gumbel sample. */
  double gumbel()
  {
    double u = uniform();
    while ( u <= 0.0 )
      u = uniform();
    return -std::log( -std::log( u ) );
  }

private:
  std::mt19937_64 engine_;
};

} // namespace mimic
