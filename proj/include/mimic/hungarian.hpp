/*!
  \file hungarian.hpp
  \brief Minimum-cost assignment on square cost matrices

  Shortest augmenting path formulation with row/column potentials,
  O(n^3). Among all optimal assignments the lexicographically smallest
  one (lowest column for row 0, then row 1, ...) is returned, found as the
  lexicographically smallest perfect matching on the tight edges of the
  optimal dual.
*/

#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <vector>

#include "errors.hpp"

namespace mimic
{

using cost_matrix = std::vector<std::vector<double>>;

struct assignment
{
  /*! \brief Column assigned to each row. */
  std::vector<uint32_t> row_to_col;
  double cost{ 0 };
};

namespace detail
{

/* augmenting DFS on tight edges restricted to rows >= first_free_row */
inline bool tight_augment( uint32_t row, std::vector<std::vector<char>> const& tight, std::vector<int64_t>& col_owner,
                           std::vector<char>& col_locked, std::vector<char>& visited, uint32_t first_free_row )
{
  auto const n = static_cast<uint32_t>( tight.size() );
  for ( uint32_t j = 0; j < n; ++j )
  {
    if ( !tight[row][j] || col_locked[j] || visited[j] )
      continue;
    visited[j] = 1;
    auto const owner = col_owner[j];
    if ( owner < 0 ||
         ( static_cast<uint32_t>( owner ) >= first_free_row &&
           tight_augment( static_cast<uint32_t>( owner ), tight, col_owner, col_locked, visited, first_free_row ) ) )
    {
      col_owner[j] = row;
      return true;
    }
  }
  return false;
}

} // namespace detail

/*! \brief Solves the assignment problem.
 *
 * Entries must be finite and non-negative; throws `mimic_error` for a
 * non-square or invalid matrix.
 */
inline assignment hungarian( cost_matrix const& c )
{
  auto const n = static_cast<uint32_t>( c.size() );
  for ( auto const& row : c )
  {
    if ( row.size() != n )
      throw mimic_error( "hungarian: cost matrix is not square" );
    for ( auto x : row )
    {
      if ( !std::isfinite( x ) || x < 0 )
        throw mimic_error( "hungarian: entries must be finite and non-negative" );
    }
  }
  assignment res;
  if ( n == 0 )
    return res;

  double const inf = std::numeric_limits<double>::infinity();
  /* 1-based potentials; column 0 is the virtual root */
  std::vector<double> u( n + 1, 0.0 ), v( n + 1, 0.0 );
  std::vector<uint32_t> p( n + 1, 0 ), way( n + 1, 0 );
  for ( uint32_t i = 1; i <= n; ++i )
  {
    p[0] = i;
    uint32_t j0 = 0;
    std::vector<double> minv( n + 1, inf );
    std::vector<char> used( n + 1, 0 );
    do
    {
      used[j0] = 1;
      uint32_t const i0 = p[j0];
      double delta = inf;
      uint32_t j1 = 0;
      for ( uint32_t j = 1; j <= n; ++j )
      {
        if ( used[j] )
          continue;
        double const cur = c[i0 - 1][j - 1] - u[i0] - v[j];
        if ( cur < minv[j] )
        {
          minv[j] = cur;
          way[j] = j0;
        }
        if ( minv[j] < delta )
        {
          delta = minv[j];
          j1 = j;
        }
      }
      for ( uint32_t j = 0; j <= n; ++j )
      {
        if ( used[j] )
        {
          u[p[j]] += delta;
          v[j] -= delta;
        }
        else
        {
          minv[j] -= delta;
        }
      }
      j0 = j1;
    } while ( p[j0] != 0 );
    do
    {
      uint32_t const j1 = way[j0];
      p[j0] = p[j1];
      j0 = j1;
    } while ( j0 );
  }

  /* tight edges of the optimal dual; every perfect matching on them is optimal */
  double scale = 1.0;
  for ( auto const& row : c )
  {
    for ( auto x : row )
      scale = std::max( scale, x );
  }
  double const eps = 1e-9 * scale * n;
  std::vector<std::vector<char>> tight( n, std::vector<char>( n, 0 ) );
  for ( uint32_t i = 0; i < n; ++i )
  {
    for ( uint32_t j = 0; j < n; ++j )
      tight[i][j] = c[i][j] - u[i + 1] - v[j + 1] <= eps;
  }

  std::vector<int64_t> col_owner( n, -1 );
  for ( uint32_t j = 1; j <= n; ++j )
    col_owner[j - 1] = static_cast<int64_t>( p[j] ) - 1;

  /* fix rows in order to their smallest feasible column */
  std::vector<char> col_locked( n, 0 );
  std::vector<uint32_t> row_col( n );
  for ( uint32_t j = 0; j < n; ++j )
    row_col[static_cast<uint32_t>( col_owner[j] )] = j;
  for ( uint32_t i = 0; i < n; ++i )
  {
    for ( uint32_t j = 0; j < n; ++j )
    {
      if ( !tight[i][j] || col_locked[j] )
        continue;
      if ( row_col[i] == j )
        break;
      /* try i -> j: the displaced row must re-augment into i's old column */
      auto trial = col_owner;
      auto const displaced = static_cast<uint32_t>( trial[j] );
      trial[row_col[i]] = -1;
      trial[j] = i;
      std::vector<char> visited( n, 0 );
      visited[j] = 1;
      col_locked[j] = 1;
      bool const ok = detail::tight_augment( displaced, tight, trial, col_locked, visited, i + 1 );
      col_locked[j] = 0;
      if ( ok )
      {
        col_owner = std::move( trial );
        for ( uint32_t jj = 0; jj < n; ++jj )
          row_col[static_cast<uint32_t>( col_owner[jj] )] = jj;
        break;
      }
    }
    col_locked[row_col[i]] = 1;
  }

  res.row_to_col = row_col;
  for ( uint32_t i = 0; i < n; ++i )
    res.cost += c[i][row_col[i]];
  return res;
}

} // namespace mimic
