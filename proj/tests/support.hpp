#pragma once

#include <algorithm>
#include <string>
#include <vector>

#include <mimic/bench.hpp>
#include <mimic/netlist.hpp>
#include <mimic/random.hpp>

namespace mimic::test
{

inline std::string data_path( std::string const& file )
{
  return std::string( MIMIC_DATA_DIR ) + "/" + file;
}

inline netlist load( std::string const& file )
{
  return read_bench_file( data_path( file ) );
}

/*! \brief Random combinational netlist.
 *
 * Gates draw fan-ins from earlier nodes (biased towards recent ones so the
 * graphs have depth); every node without fan-out becomes an output.
 */
inline netlist random_netlist( uint64_t seed, uint32_t num_pis, uint32_t num_gates, std::string const& prefix = "n",
                               bool only_two_input = false )
{
  random_source rng( seed );
  netlist ntk;
  for ( uint32_t i = 0; i < num_pis; ++i )
    ntk.add_input( prefix + "i" + std::to_string( i ) );
  static constexpr gate_type kinds[] = { gate_type::and_, gate_type::nand, gate_type::or_, gate_type::nor,
                                         gate_type::xor_, gate_type::xnor, gate_type::not_, gate_type::buf };
  std::vector<uint32_t> fanout( num_pis + num_gates, 0 );
  for ( uint32_t g = 0; g < num_gates; ++g )
  {
    auto const t = kinds[rng.below( only_two_input ? 6 : 8 )];
    auto const avail = static_cast<uint32_t>( ntk.size() );
    uint32_t arity = is_unary( t ) ? 1u : 2u;
    if ( !only_two_input && !is_unary( t ) && rng.uniform() < 0.15 )
      arity = 3;
    std::vector<node_id> fanin;
    for ( uint32_t a = 0; a < arity; ++a )
    {
      node_id f;
      if ( rng.uniform() < 0.6 && avail > num_pis )
      {
        auto const window = std::min<uint32_t>( avail, 8 );
        f = avail - 1 - static_cast<node_id>( rng.below( window ) );
      }
      else
      {
        f = static_cast<node_id>( rng.below( avail ) );
      }
      if ( std::find( fanin.begin(), fanin.end(), f ) != fanin.end() )
        f = static_cast<node_id>( rng.below( avail ) );
      fanin.push_back( f );
    }
    for ( auto f : fanin )
      ++fanout[f];
    ntk.add_gate( prefix + "g" + std::to_string( g ), t, fanin );
  }
  for ( node_id v = num_pis; v < ntk.size(); ++v )
  {
    if ( fanout[v] == 0 )
      ntk.add_output( v );
  }
  if ( ntk.pos().empty() && ntk.size() > 0 )
    ntk.add_output( static_cast<node_id>( ntk.size() - 1 ) );
  return ntk;
}

} // namespace mimic::test
