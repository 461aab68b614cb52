/*!
  \file simulate.hpp
  \brief Bit-parallel simulation, truth tables and equivalence checks

  Input pattern `i` assigns bit `j` of `i` to the `j`-th primary input.
*/

#pragma once

#include <algorithm>
#include <bit>
#include <cstdint>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "errors.hpp"
#include "netlist.hpp"
#include "random.hpp"

namespace mimic
{

/*! \brief Simulates 64 patterns; returns the word of every node. */
inline std::vector<uint64_t> simulate_words( netlist const& ntk, std::span<uint64_t const> pi_words,
                                             std::vector<node_id> const& topo )
{
  if ( pi_words.size() != ntk.pis().size() )
    throw mimic_error( "simulation needs one word per primary input" );
  std::vector<uint64_t> val( ntk.size(), 0 );
  for ( std::size_t i = 0; i < pi_words.size(); ++i )
    val[ntk.pis()[i].node] = pi_words[i];
  std::vector<uint64_t> in;
  for ( auto v : topo )
  {
    auto const& nd = ntk[v];
    if ( nd.type == gate_type::input )
      continue;
    in.clear();
    for ( auto f : nd.fanin )
      in.push_back( val[f] );
    val[v] = evaluate( nd.type, in );
  }
  return val;
}

inline std::vector<uint64_t> simulate_words( netlist const& ntk, std::span<uint64_t const> pi_words )
{
  return simulate_words( ntk, pi_words, topological_order( ntk ) );
}

/*! \brief Evaluates one input assignment; returns one bit per primary output. */
inline std::vector<bool> simulate( netlist const& ntk, std::vector<bool> const& assignment )
{
  if ( assignment.size() != ntk.pis().size() )
    throw mimic_error( "assignment covers " + std::to_string( assignment.size() ) + " of " +
                       std::to_string( ntk.pis().size() ) + " primary inputs" );
  std::vector<uint64_t> words( assignment.size() );
  for ( std::size_t i = 0; i < assignment.size(); ++i )
    words[i] = assignment[i] ? 1u : 0u;
  auto const val = simulate_words( ntk, words );
  std::vector<bool> out;
  for ( auto const& p : ntk.pos() )
    out.push_back( val[p.node] & 1u );
  return out;
}

/*! \brief Word `block` of the exhaustive pattern set for input `j`. */
inline uint64_t exhaustive_word( uint32_t j, uint64_t block )
{
  static constexpr uint64_t masks[6] = { 0xaaaaaaaaaaaaaaaaull, 0xccccccccccccccccull, 0xf0f0f0f0f0f0f0f0ull,
                                         0xff00ff00ff00ff00ull, 0xffff0000ffff0000ull, 0xffffffff00000000ull };
  if ( j < 6 )
    return masks[j];
  return ( block >> ( j - 6 ) ) & 1u ? ~uint64_t( 0 ) : 0u;
}

/*! \brief Complete PO table over all input patterns, one bit vector per output. */
class truth_table
{
public:
  truth_table( uint32_t num_inputs, uint32_t num_outputs )
      : num_inputs_( num_inputs ), bits_( num_outputs, std::vector<uint64_t>( num_words( num_inputs ), 0 ) )
  {
  }

  uint32_t num_inputs() const { return num_inputs_; }
  uint32_t num_outputs() const { return static_cast<uint32_t>( bits_.size() ); }
  uint64_t num_rows() const { return uint64_t( 1 ) << num_inputs_; }

  bool get( uint64_t row, uint32_t output ) const { return ( bits_[output][row >> 6] >> ( row & 63 ) ) & 1u; }

  /*! \brief All PO bits of one row. */
  std::vector<bool> row( uint64_t r ) const
  {
    std::vector<bool> out( bits_.size() );
    for ( uint32_t o = 0; o < bits_.size(); ++o )
      out[o] = get( r, o );
    return out;
  }

  std::vector<uint64_t>& words( uint32_t output ) { return bits_[output]; }
  std::vector<uint64_t> const& words( uint32_t output ) const { return bits_[output]; }

  bool operator==( truth_table const& other ) const = default;

  static std::size_t num_words( uint32_t num_inputs ) { return num_inputs <= 6 ? 1u : std::size_t( 1 ) << ( num_inputs - 6 ); }

private:
  uint32_t num_inputs_;
  std::vector<std::vector<uint64_t>> bits_;
};

inline constexpr uint32_t default_truth_table_cap = 20u;

/*! \brief Exhaustive truth table; refuses netlists with more than `cap` inputs. */
inline truth_table compute_truth_table( netlist const& ntk, uint32_t cap = default_truth_table_cap )
{
  auto const k = static_cast<uint32_t>( ntk.pis().size() );
  if ( k > cap )
    throw mimic_error( "truth table refused: " + std::to_string( k ) + " inputs exceed the cap of " + std::to_string( cap ) +
                       "; sample instead" );
  truth_table tt( k, static_cast<uint32_t>( ntk.pos().size() ) );
  auto const topo = topological_order( ntk );
  std::vector<uint64_t> pi( k );
  uint64_t const valid = k >= 6 ? ~uint64_t( 0 ) : ( uint64_t( 1 ) << ( uint64_t( 1 ) << k ) ) - 1;
  for ( uint64_t block = 0; block < truth_table::num_words( k ); ++block )
  {
    for ( uint32_t j = 0; j < k; ++j )
      pi[j] = exhaustive_word( j, block );
    auto const val = simulate_words( ntk, pi, topo );
    for ( uint32_t o = 0; o < tt.num_outputs(); ++o )
      tt.words( o )[block] = val[ntk.pos()[o].node] & valid;
  }
  return tt;
}

/*! \brief How two netlists' interfaces are lined up for comparison. */
enum class port_alignment
{
  by_name,
  by_position
};

/*! \brief Per-output agreement between `ntk` and `reference`.
 *
 * Patterns range over the reference inputs: exhaustively when there are at
 * most `exhaustive_cap` of them, otherwise `sample_n` seeded random
 * vectors. Inputs of `ntk` without a counterpart are held at 0; outputs of
 * `ntk` without a counterpart are ignored.
 */
struct agreement_result
{
  uint64_t patterns{ 0 };
  uint64_t compared_bits{ 0 };
  uint64_t agreeing_bits{ 0 };
  bool exhaustive{ true };

  double percentage() const { return compared_bits ? 100.0 * static_cast<double>( agreeing_bits ) / static_cast<double>( compared_bits ) : 100.0; }
};

inline agreement_result agreement( netlist const& ntk, netlist const& reference, port_alignment align = port_alignment::by_name,
                                   uint64_t sample_n = 10000, uint64_t seed = 1, uint32_t exhaustive_cap = default_truth_table_cap )
{
  auto const& rpi = reference.pis();
  auto const& rpo = reference.pos();
  /* pi_src[i] = reference input feeding ntk input i, or -1 */
  std::vector<int64_t> pi_src( ntk.pis().size(), -1 );
  std::vector<std::size_t> po_dst( rpo.size() );
  if ( align == port_alignment::by_name )
  {
    std::unordered_map<std::string, std::size_t> rname;
    for ( std::size_t i = 0; i < rpi.size(); ++i )
      rname.emplace( rpi[i].name, i );
    std::size_t matched = 0;
    for ( std::size_t i = 0; i < ntk.pis().size(); ++i )
    {
      if ( auto it = rname.find( ntk.pis()[i].name ); it != rname.end() )
      {
        pi_src[i] = static_cast<int64_t>( it->second );
        ++matched;
      }
    }
    if ( matched != rpi.size() )
      throw mimic_error( "input mismatch: " + std::to_string( rpi.size() - matched ) + " reference inputs have no counterpart" );
    for ( std::size_t o = 0; o < rpo.size(); ++o )
    {
      auto it = std::find_if( ntk.pos().begin(), ntk.pos().end(), [&]( auto const& p ) { return p.name == rpo[o].name; } );
      if ( it == ntk.pos().end() )
        throw mimic_error( "output '" + rpo[o].name + "' missing" );
      po_dst[o] = static_cast<std::size_t>( it - ntk.pos().begin() );
    }
  }
  else
  {
    if ( ntk.pis().size() < rpi.size() || ntk.pos().size() < rpo.size() )
      throw mimic_error( "width mismatch" );
    for ( std::size_t i = 0; i < rpi.size(); ++i )
      pi_src[i] = static_cast<int64_t>( i );
    for ( std::size_t o = 0; o < rpo.size(); ++o )
      po_dst[o] = o;
  }

  agreement_result res;
  auto const k = static_cast<uint32_t>( rpi.size() );
  auto const topo_n = topological_order( ntk );
  auto const topo_r = topological_order( reference );
  std::vector<uint64_t> rw( k ), nw( ntk.pis().size() );

  auto run_block = [&]( uint64_t valid ) {
    for ( std::size_t i = 0; i < nw.size(); ++i )
      nw[i] = pi_src[i] >= 0 ? rw[static_cast<std::size_t>( pi_src[i] )] : 0u;
    auto const vr = simulate_words( reference, rw, topo_r );
    auto const vn = simulate_words( ntk, nw, topo_n );
    for ( std::size_t o = 0; o < rpo.size(); ++o )
    {
      auto const diff = ( vr[rpo[o].node] ^ vn[ntk.pos()[po_dst[o]].node] ) & valid;
      auto const cnt = static_cast<uint64_t>( std::popcount( valid ) );
      res.compared_bits += cnt;
      res.agreeing_bits += cnt - static_cast<uint64_t>( std::popcount( diff ) );
    }
    res.patterns += static_cast<uint64_t>( std::popcount( valid ) );
  };

  if ( k <= exhaustive_cap )
  {
    uint64_t const valid = k >= 6 ? ~uint64_t( 0 ) : ( uint64_t( 1 ) << ( uint64_t( 1 ) << k ) ) - 1;
    for ( uint64_t block = 0; block < truth_table::num_words( k ); ++block )
    {
      for ( uint32_t j = 0; j < k; ++j )
        rw[j] = exhaustive_word( j, block );
      run_block( valid );
    }
  }
  else
  {
    res.exhaustive = false;
    random_source rng( seed );
    for ( uint64_t done = 0; done < sample_n; done += 64 )
    {
      for ( auto& w : rw )
        w = rng.bits();
      auto const left = sample_n - done;
      run_block( left >= 64 ? ~uint64_t( 0 ) : ( uint64_t( 1 ) << left ) - 1 );
    }
  }
  return res;
}

/*! \brief Exact equivalence over the union of both input sets, matched by name.
 *
 * Inputs present on one side only are enumerated as free variables, so a
 * `true` result also proves the extra inputs are irrelevant. Outputs are
 * compared by name; every output of `b` must exist in `a`.
 */
inline bool equivalent_by_name( netlist const& a, netlist const& b, uint32_t cap = default_truth_table_cap )
{
  std::vector<std::string> names;
  std::unordered_map<std::string, uint32_t> var;
  for ( auto const* n : { &a, &b } )
  {
    for ( auto const& p : n->pis() )
    {
      if ( var.emplace( p.name, static_cast<uint32_t>( names.size() ) ).second )
        names.push_back( p.name );
    }
  }
  auto const k = static_cast<uint32_t>( names.size() );
  if ( k > cap )
    throw mimic_error( "equivalence check refused: too many inputs" );
  std::vector<std::pair<node_id, node_id>> outs;
  for ( auto const& pb : b.pos() )
  {
    auto it = std::find_if( a.pos().begin(), a.pos().end(), [&]( auto const& p ) { return p.name == pb.name; } );
    if ( it == a.pos().end() )
      return false;
    outs.emplace_back( it->node, pb.node );
  }
  auto const ta = topological_order( a );
  auto const tb = topological_order( b );
  std::vector<uint64_t> wa( a.pis().size() ), wb( b.pis().size() );
  uint64_t const valid = k >= 6 ? ~uint64_t( 0 ) : ( uint64_t( 1 ) << ( uint64_t( 1 ) << k ) ) - 1;
  for ( uint64_t block = 0; block < truth_table::num_words( k ); ++block )
  {
    for ( std::size_t i = 0; i < wa.size(); ++i )
      wa[i] = exhaustive_word( var[a.pis()[i].name], block );
    for ( std::size_t i = 0; i < wb.size(); ++i )
      wb[i] = exhaustive_word( var[b.pis()[i].name], block );
    auto const va = simulate_words( a, wa, ta );
    auto const vb = simulate_words( b, wb, tb );
    for ( auto const& [oa, ob] : outs )
    {
      if ( ( va[oa] ^ vb[ob] ) & valid )
        return false;
    }
  }
  return true;
}

} // namespace mimic
