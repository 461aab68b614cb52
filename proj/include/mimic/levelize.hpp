/*!
  \file levelize.hpp
  \brief Longest-path levelization

  Fan-in-free nodes (primary inputs and constants) sit on layer 0; every
  other node sits one layer above its deepest fan-in, so a layer index is
  the logic depth of the node.
*/

#pragma once

#include <algorithm>
#include <cstdint>
#include <vector>

#include "netlist.hpp"

namespace mimic
{

struct levelization
{
  std::vector<std::vector<node_id>> layers;
  std::vector<uint32_t> level_of;

  /*! \brief Index of the deepest layer (0 for a netlist without gates). */
  uint32_t depth() const
  {
    return layers.empty() ? 0u : static_cast<uint32_t>( layers.size() - 1 );
  }
};

inline levelization levelize( netlist const& ntk )
{
  levelization lv;
  lv.level_of.assign( ntk.size(), 0 );
  for ( auto v : topological_order( ntk ) )
  {
    uint32_t l = 0;
    for ( auto f : ntk[v].fanin )
      l = std::max( l, lv.level_of[f] + 1 );
    lv.level_of[v] = l;
  }
  if ( ntk.empty() )
    return lv;
  auto const max_level = *std::max_element( lv.level_of.begin(), lv.level_of.end() );
  lv.layers.resize( max_level + 1 );
  for ( node_id v = 0; v < ntk.size(); ++v )
    lv.layers[lv.level_of[v]].push_back( v );
  return lv;
}

} // namespace mimic
