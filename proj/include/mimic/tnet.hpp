/*!
  \file tnet.hpp
  \brief Training a selector net on an appearance/function pair and extracting the NAND array

  The dataset holds the appearance truth table at p = 0 and the functional
  truth table at p = 1 on unified ports. Training is full-batch or
  mini-batch Adam with a geometric temperature schedule; the trace keeps
  per-epoch loss components and hard-mode accuracies.
*/

#pragma once

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include <json.hpp>

#include "covert.hpp"
#include "deploy.hpp"
#include "errors.hpp"
#include "netlist.hpp"
#include "random.hpp"
#include "selector.hpp"
#include "simulate.hpp"

namespace mimic
{

/*! \brief How the ports of A and F share the unified net ports (-1 = absent on that side). */
struct port_unification
{
  std::vector<std::string> pi_names;
  std::vector<int32_t> a_pi;
  std::vector<int32_t> f_pi;
  std::vector<std::string> po_names;
  std::vector<int32_t> a_po;
  std::vector<int32_t> f_po;
};

namespace detail
{

/* pairs by name first, then the rest by position; F order first, then A-only ports */
inline void unify_ports( std::vector<std::string> const& a, std::vector<std::string> const& f, std::vector<std::string>& names,
                         std::vector<int32_t>& ai, std::vector<int32_t>& fi )
{
  std::vector<int32_t> f_to_a( f.size(), -1 );
  std::vector<bool> a_used( a.size(), false );
  std::unordered_map<std::string, int32_t> a_index;
  for ( std::size_t i = 0; i < a.size(); ++i )
    a_index.emplace( a[i], static_cast<int32_t>( i ) );
  for ( std::size_t i = 0; i < f.size(); ++i )
  {
    if ( auto it = a_index.find( f[i] ); it != a_index.end() )
    {
      f_to_a[i] = it->second;
      a_used[static_cast<std::size_t>( it->second )] = true;
    }
  }
  std::size_t next = 0;
  for ( std::size_t i = 0; i < f.size(); ++i )
  {
    if ( f_to_a[i] >= 0 )
      continue;
    while ( next < a.size() && a_used[next] )
      ++next;
    if ( next < a.size() )
    {
      f_to_a[i] = static_cast<int32_t>( next );
      a_used[next] = true;
    }
  }
  std::unordered_set<std::string> taken( f.begin(), f.end() );
  for ( std::size_t i = 0; i < f.size(); ++i )
  {
    names.push_back( f[i] );
    fi.push_back( static_cast<int32_t>( i ) );
    ai.push_back( f_to_a[i] );
  }
  for ( std::size_t i = 0; i < a.size(); ++i )
  {
    if ( a_used[i] )
      continue;
    names.push_back( taken.count( a[i] ) ? unique_name( "A_" + a[i], taken ) : ( taken.insert( a[i] ), a[i] ) );
    fi.push_back( -1 );
    ai.push_back( static_cast<int32_t>( i ) );
  }
}

} // namespace detail

inline port_unification unify_ports( netlist const& a, netlist const& f )
{
  port_unification u;
  auto names = []( std::vector<port> const& ps ) {
    std::vector<std::string> r;
    for ( auto const& p : ps )
      r.push_back( p.name );
    return r;
  };
  detail::unify_ports( names( a.pis() ), names( f.pis() ), u.pi_names, u.a_pi, u.f_pi );
  detail::unify_ports( names( a.pos() ), names( f.pos() ), u.po_names, u.a_po, u.f_po );
  return u;
}

struct mimicry_dataset
{
  port_unification ports;
  std::vector<mimicry_row> rows;
  /*! \brief Whether each regime was enumerated exhaustively. */
  bool exhaustive_p0{ true };
  bool exhaustive_p1{ true };

  uint32_t num_pis() const { return static_cast<uint32_t>( ports.pi_names.size() ); }
  uint32_t num_pos() const { return static_cast<uint32_t>( ports.po_names.size() ); }
};

namespace detail
{

/* rows of one regime: inputs absent from `ntk` are held at 0, outputs absent from it are masked */
inline void append_regime( mimicry_dataset& d, netlist const& ntk, std::vector<int32_t> const& pi_map, std::vector<int32_t> const& po_map,
                           double p, uint32_t cap, uint64_t samples, uint64_t seed, bool& exhaustive )
{
  auto const k = static_cast<uint32_t>( ntk.pis().size() );
  auto const topo = topological_order( ntk );
  std::vector<uint64_t> words( k );
  auto emit = [&]( uint64_t valid ) {
    auto const val = simulate_words( ntk, words, topo );
    for ( uint32_t bit = 0; bit < 64; ++bit )
    {
      if ( !( ( valid >> bit ) & 1u ) )
        continue;
      mimicry_row r;
      r.p = p;
      r.in.assign( pi_map.size(), 0.0 );
      for ( std::size_t i = 0; i < pi_map.size(); ++i )
      {
        if ( pi_map[i] >= 0 )
          r.in[i] = static_cast<double>( ( words[static_cast<std::size_t>( pi_map[i] )] >> bit ) & 1u );
      }
      r.target.assign( po_map.size(), 0.0 );
      r.mask.assign( po_map.size(), 0 );
      for ( std::size_t o = 0; o < po_map.size(); ++o )
      {
        if ( po_map[o] < 0 )
          continue;
        r.mask[o] = 1;
        r.target[o] = static_cast<double>( ( val[ntk.pos()[static_cast<std::size_t>( po_map[o] )].node] >> bit ) & 1u );
      }
      d.rows.push_back( std::move( r ) );
    }
  };
  if ( k <= cap )
  {
    exhaustive = true;
    uint64_t const valid = k >= 6 ? ~uint64_t( 0 ) : ( uint64_t( 1 ) << ( uint64_t( 1 ) << k ) ) - 1;
    for ( uint64_t block = 0; block < truth_table::num_words( k ); ++block )
    {
      for ( uint32_t j = 0; j < k; ++j )
        words[j] = exhaustive_word( j, block );
      emit( valid );
    }
    return;
  }
  exhaustive = false;
  random_source rng( seed );
  for ( uint64_t done = 0; done < samples; done += 64 )
  {
    for ( auto& w : words )
      w = rng.bits();
    auto const left = samples - done;
    emit( left >= 64 ? ~uint64_t( 0 ) : ( uint64_t( 1 ) << left ) - 1 );
  }
}

} // namespace detail

/*! \brief Appearance rows (p = 0) followed by function rows (p = 1).
 *
 * Each regime is enumerated exhaustively up to `cap` inputs, otherwise
 * `samples` seeded random vectors are used.
 */
inline mimicry_dataset make_dataset( netlist const& appearance, netlist const& function, uint32_t cap = default_truth_table_cap,
                                     uint64_t samples = 10000, uint64_t seed = 1 )
{
  if ( appearance.pos().empty() || function.pos().empty() )
    throw mimic_error( "dataset: both circuits need outputs" );
  mimicry_dataset d;
  d.ports = unify_ports( appearance, function );
  detail::append_regime( d, appearance, d.ports.a_pi, d.ports.a_po, 0.0, cap, samples, derive_seed( seed, 0 ), d.exhaustive_p0 );
  detail::append_regime( d, function, d.ports.f_pi, d.ports.f_po, 1.0, cap, samples, derive_seed( seed, 1 ), d.exhaustive_p1 );
  return d;
}

/*! \brief Hard-mode percentage of counted PO bits that match, over the rows of regime p. */
inline double hard_accuracy( selector_net const& net, mimicry_dataset const& d, double p )
{
  auto const eff = effective_params( net.theta0, net.theta1, p );
  auto const w = slot_weights( net, eff, select_mode::hard );
  uint64_t bits = 0, ok = 0;
  std::vector<double> sig;
  for ( auto const& r : d.rows )
  {
    if ( r.p != p )
      continue;
    auto const out = forward_weights( net, w, r.in, &sig );
    for ( uint32_t o = 0; o < net.num_pos(); ++o )
    {
      if ( !r.mask[o] )
        continue;
      ++bits;
      ok += ( out[o] > 0.5 ) == ( r.target[o] > 0.5 );
    }
  }
  return bits ? 100.0 * static_cast<double>( ok ) / static_cast<double>( bits ) : 100.0;
}

/*! \brief Argmax connections of both parameter sets and where they disagree. */
struct containment_report
{
  /*! \brief Slots checked: two per retained node plus one per PO present in both circuits. */
  uint32_t slots{ 0 };
  uint32_t violations{ 0 };
  /*! \brief Retained nodes (reachable from a counted PO through either set's argmax edges). */
  std::vector<bool> kept;

  double fraction() const { return slots ? static_cast<double>( violations ) / static_cast<double>( slots ) : 0.0; }
};

/*! \brief Counts theta1 argmax edges absent from the theta0 argmax edges of the same node.
 *
 * A theta1 slot on the dummy adds no edge and is never a violation.
 * `a_po` / `f_po` say which POs are real for the appearance and function
 * circuits; empty means all.
 */
inline containment_report containment( selector_net const& net, std::vector<int32_t> const& a_po = {}, std::vector<int32_t> const& f_po = {} )
{
  auto const np = net.num_pis();
  auto pick = [&]( std::vector<double> const& th, uint32_t s ) {
    return detail::argmax( th.data() + net.slot_offset( s ), net.slot_width( s ) );
  };
  auto real = [&]( std::vector<int32_t> const& m, uint32_t o ) { return m.empty() || m[o] >= 0; };

  containment_report r;
  r.kept.assign( net.num_nodes(), false );
  std::vector<uint32_t> stack;
  auto visit = [&]( uint32_t sig ) {
    if ( sig >= np && sig < net.num_signals() && !r.kept[sig - np] )
    {
      r.kept[sig - np] = true;
      stack.push_back( sig - np );
    }
  };
  for ( uint32_t o = 0; o < net.num_pos(); ++o )
  {
    auto const s = net.num_node_slots() + o;
    if ( real( a_po, o ) )
      visit( pick( net.theta0, s ) );
    if ( real( f_po, o ) )
      visit( pick( net.theta1, s ) );
  }
  while ( !stack.empty() )
  {
    auto const j = stack.back();
    stack.pop_back();
    for ( uint32_t k = 0; k < 2; ++k )
    {
      visit( pick( net.theta0, 2 * j + k ) );
      visit( pick( net.theta1, 2 * j + k ) );
    }
  }
  for ( uint32_t j = 0; j < net.num_nodes(); ++j )
  {
    if ( !r.kept[j] )
      continue;
    auto const a = pick( net.theta0, 2 * j ), b = pick( net.theta0, 2 * j + 1 );
    for ( uint32_t k = 0; k < 2; ++k )
    {
      auto const t = pick( net.theta1, 2 * j + k );
      ++r.slots;
      r.violations += t != a && t != b && t < net.slot_size( 2 * j + k );
    }
  }
  for ( uint32_t o = 0; o < net.num_pos(); ++o )
  {
    if ( !real( a_po, o ) || !real( f_po, o ) )
      continue;
    auto const s = net.num_node_slots() + o;
    ++r.slots;
    r.violations += pick( net.theta0, s ) != pick( net.theta1, s );
  }
  return r;
}

inline containment_report containment( selector_net const& net, port_unification const& u )
{
  return containment( net, u.a_po, u.f_po );
}

struct epoch_record
{
  uint32_t epoch{ 0 };
  double tau{ 0.0 };
  loss_breakdown loss;
  double acc_p0{ 0.0 };
  double acc_p1{ 0.0 };
  double violation_fraction{ 0.0 };
};

struct train_result
{
  selector_net net;
  std::vector<epoch_record> trace;
  /*! \brief Epoch whose parameters were returned (0 = initialization). */
  uint32_t best_epoch{ 0 };
  /*! \brief Restart whose run was returned. */
  uint32_t best_restart{ 0 };
  bool diverged{ false };
  /*! \brief Hard accuracies after selector refinement (equal to the snapshot's when it was skipped or rejected). */
  double refined_acc_p0{ 0.0 };
  double refined_acc_p1{ 0.0 };
  bool refined{ false };
};

/*! \brief Random logits with theta1 = theta0. */
inline selector_net init_net( net_shape const& shape, double scale, uint64_t seed )
{
  selector_net net( shape );
  random_source rng( seed );
  for ( auto& x : net.theta0 )
    x = scale * rng.normal();
  net.theta1 = net.theta0;
  net.pin_dummies();
  for ( uint32_t s = 1; s < net.num_node_slots(); s += 2 )
    net.theta1[net.dummy_index( s )] = scale * rng.normal();
  return net;
}

namespace detail
{

/* higher is better: worst-regime accuracy, minus a heavy charge for containment violations over 5% */
inline double snapshot_score( double acc0, double acc1, double viol )
{
  return std::min( acc0, acc1 ) - 1000.0 * std::max( 0.0, viol - 0.05 ) - 10.0 * viol;
}

struct adam
{
  std::vector<double> m, v;
  uint64_t t{ 0 };

  void step( std::vector<double>& x, std::vector<double> const& g, double lr )
  {
    constexpr double b1 = 0.9, b2 = 0.999, eps = 1e-8;
    if ( m.empty() )
    {
      m.assign( x.size(), 0.0 );
      v.assign( x.size(), 0.0 );
    }
    ++t;
    auto const c1 = 1.0 - std::pow( b1, static_cast<double>( t ) );
    auto const c2 = 1.0 - std::pow( b2, static_cast<double>( t ) );
    for ( std::size_t i = 0; i < x.size(); ++i )
    {
      m[i] = b1 * m[i] + ( 1 - b1 ) * g[i];
      v[i] = b2 * v[i] + ( 1 - b2 ) * g[i] * g[i];
      x[i] -= lr * ( m[i] / c1 ) / ( std::sqrt( v[i] / c2 ) + eps );
    }
  }
};

inline train_result train_once( mimicry_dataset const& d, net_shape const& shape, train_config const& cfg, uint64_t seed )
{
  train_result res;
  auto net = init_net( shape, cfg.init_scale, derive_seed( seed, 0 ) );
  net.tau = cfg.tau_start;
  res.net = net;

  auto record = [&]( uint32_t epoch, loss_breakdown const& lb ) {
    epoch_record e;
    e.epoch = epoch;
    e.tau = net.tau;
    e.loss = lb;
    e.acc_p0 = hard_accuracy( net, d, 0.0 );
    e.acc_p1 = hard_accuracy( net, d, 1.0 );
    e.violation_fraction = containment( net, d.ports ).fraction();
    res.trace.push_back( e );
    return e;
  };

  auto const first = record( 0, total_loss( net, d.rows, cfg, select_mode::soft ) );
  double best = snapshot_score( first.acc_p0, first.acc_p1, first.violation_fraction );

  std::vector<uint32_t> order( d.rows.size() );
  for ( uint32_t i = 0; i < order.size(); ++i )
    order[i] = i;
  auto const batch = cfg.batch_size == 0 ? static_cast<uint32_t>( order.size() ) : std::min<uint32_t>( cfg.batch_size, order.size() );
  random_source shuffle( derive_seed( seed, 1 ) );
  adam opt0, opt1;
  std::vector<double> g0, g1;
  /* shared coordinates: base = theta0, offset = theta1 - theta0 (theta1 itself at dummy logits) */
  std::vector<bool> is_dummy( net.num_params(), false );
  for ( uint32_t s = 1; s < net.num_node_slots(); s += 2 )
    is_dummy[net.dummy_index( s )] = true;
  std::vector<double> base = net.theta0, offset( net.num_params() ), gb( net.num_params() ), go( net.num_params() );
  for ( std::size_t i = 0; i < offset.size(); ++i )
    offset[i] = is_dummy[i] ? net.theta1[i] : net.theta1[i] - net.theta0[i];
  std::vector<mimicry_row> chunk;
  auto step_cfg = cfg;

  for ( uint32_t epoch = 1; epoch <= cfg.epochs; ++epoch )
  {
    auto const frac = cfg.epochs > 1 ? static_cast<double>( epoch - 1 ) / static_cast<double>( cfg.epochs - 1 ) : 1.0;
    net.tau = cfg.tau_start * std::pow( cfg.tau_end / cfg.tau_start, frac );
    if ( cfg.cryptic_warmup > 0 )
      step_cfg.lambda_cryptic = cfg.lambda_cryptic * std::min( 1.0, static_cast<double>( epoch ) / ( cfg.cryptic_warmup * cfg.epochs ) );
    if ( batch < order.size() )
    {
      for ( auto i = order.size(); i > 1; --i )
        std::swap( order[i - 1], order[shuffle.below( i )] );
    }
    loss_breakdown sum;
    uint32_t steps = 0;
    for ( std::size_t start = 0; start < order.size(); start += batch )
    {
      chunk.clear();
      for ( auto i = start; i < std::min( order.size(), start + batch ); ++i )
        chunk.push_back( d.rows[order[i]] );
      auto const noise = derive_seed( seed, 2 + ( uint64_t( epoch ) << 20 ) + steps );
      auto const lb = total_loss( net, chunk, step_cfg, cfg.mode, noise, &g0, &g1 );
      if ( !std::isfinite( lb.total ) )
      {
        res.diverged = true;
        return res;
      }
      if ( cfg.shared_coordinates )
      {
        for ( std::size_t i = 0; i < gb.size(); ++i )
        {
          gb[i] = is_dummy[i] ? 0.0 : g0[i] + g1[i];
          go[i] = g1[i];
        }
        opt0.step( base, gb, cfg.learning_rate );
        opt1.step( offset, go, cfg.learning_rate );
        for ( std::size_t i = 0; i < base.size(); ++i )
        {
          net.theta0[i] = base[i];
          net.theta1[i] = is_dummy[i] ? offset[i] : base[i] + offset[i];
        }
      }
      else
      {
        opt0.step( net.theta0, g0, cfg.learning_rate );
        opt1.step( net.theta1, g1, cfg.learning_rate );
      }
      sum.total += lb.total;
      sum.hardness += lb.hardness;
      sum.reg += lb.reg;
      sum.cryptic += lb.cryptic;
      ++steps;
    }
    for ( auto* x : { &sum.total, &sum.hardness, &sum.reg, &sum.cryptic } )
      *x /= steps;
    auto const e = record( epoch, sum );
    auto const score = snapshot_score( e.acc_p0, e.acc_p1, e.violation_fraction );
    if ( score > best )
    {
      best = score;
      res.net = net;
      res.best_epoch = epoch;
    }
  }
  return res;
}

} // namespace detail

struct refine_result
{
  double acc_p0{ 0.0 };
  double acc_p1{ 0.0 };
  /*! \brief True when the refined selectors replaced the input ones. */
  bool improved{ false };
};

namespace detail
{

/* argmax picks as a discrete state; theta1 node picks index {a, b, dummy} so containment holds by construction */
struct hard_state
{
  std::vector<uint32_t> a, b;
  std::vector<uint8_t> fa, fb; /* 0: a, 1: b, 2: dummy (fb only) */
  std::vector<uint32_t> po;
};

/* bit-parallel rows of one regime: inputs, targets and masks as 64-row words */
struct packed_regime
{
  uint32_t words{ 0 };
  std::vector<uint64_t> in;     /* pi * words + w */
  std::vector<uint64_t> target; /* po * words + w */
  std::vector<uint64_t> mask;
  uint64_t bits{ 0 };
};

inline packed_regime pack_regime( mimicry_dataset const& d, double p )
{
  packed_regime r;
  uint32_t n = 0;
  for ( auto const& row : d.rows )
    n += row.p == p;
  r.words = ( n + 63 ) / 64;
  r.in.assign( std::size_t( d.num_pis() ) * r.words, 0 );
  r.target.assign( std::size_t( d.num_pos() ) * r.words, 0 );
  r.mask.assign( std::size_t( d.num_pos() ) * r.words, 0 );
  uint32_t k = 0;
  for ( auto const& row : d.rows )
  {
    if ( row.p != p )
      continue;
    auto const w = k / 64;
    auto const bit = uint64_t( 1 ) << ( k % 64 );
    for ( uint32_t i = 0; i < d.num_pis(); ++i )
    {
      if ( row.in[i] > 0.5 )
        r.in[i * r.words + w] |= bit;
    }
    for ( uint32_t o = 0; o < d.num_pos(); ++o )
    {
      if ( !row.mask[o] )
        continue;
      r.mask[o * r.words + w] |= bit;
      ++r.bits;
      if ( row.target[o] > 0.5 )
        r.target[o * r.words + w] |= bit;
    }
    ++k;
  }
  return r;
}

/* percentage of counted PO bits matched by the hard network of regime p (1 = function) */
inline double packed_accuracy( selector_net const& net, hard_state const& st, packed_regime const& pr, bool function, std::vector<uint64_t>& sig )
{
  if ( pr.bits == 0 )
    return 100.0;
  auto const np = net.num_pis();
  auto const nw = pr.words;
  sig.resize( std::size_t( net.num_signals() ) * nw );
  std::copy( pr.in.begin(), pr.in.end(), sig.begin() );
  for ( uint32_t j = 0; j < net.num_nodes(); ++j )
  {
    uint32_t x = st.a[j], y = st.b[j];
    bool one = false;
    if ( function )
    {
      x = st.fa[j] == 0 ? st.a[j] : st.b[j];
      one = st.fb[j] == 2;
      y = st.fb[j] == 0 ? st.a[j] : st.b[j];
    }
    auto* out = sig.data() + std::size_t( np + j ) * nw;
    auto const* sx = sig.data() + std::size_t( x ) * nw;
    auto const* sy = sig.data() + std::size_t( y ) * nw;
    for ( uint32_t w = 0; w < nw; ++w )
      out[w] = ~( sx[w] & ( one ? ~uint64_t( 0 ) : sy[w] ) );
  }
  uint64_t ok = 0;
  for ( uint32_t o = 0; o < net.num_pos(); ++o )
  {
    auto const* s = sig.data() + std::size_t( st.po[o] ) * nw;
    for ( uint32_t w = 0; w < nw; ++w )
      ok += std::popcount( pr.mask[o * nw + w] & ~( s[w] ^ pr.target[o * nw + w] ) );
  }
  return 100.0 * static_cast<double>( ok ) / static_cast<double>( pr.bits );
}

inline hard_state read_state( selector_net const& net )
{
  auto pick = [&]( std::vector<double> const& th, uint32_t s, uint32_t n ) { return detail::argmax( th.data() + net.slot_offset( s ), n ); };
  hard_state st;
  auto const n = net.num_nodes();
  st.a.resize( n );
  st.b.resize( n );
  st.fa.resize( n );
  st.fb.resize( n );
  for ( uint32_t j = 0; j < n; ++j )
  {
    st.a[j] = pick( net.theta0, 2 * j, net.slot_size( 2 * j ) );
    st.b[j] = pick( net.theta0, 2 * j + 1, net.slot_size( 2 * j + 1 ) );
    auto const ta = pick( net.theta1, 2 * j, net.slot_width( 2 * j ) );
    auto const tb = pick( net.theta1, 2 * j + 1, net.slot_width( 2 * j + 1 ) );
    st.fa[j] = ta == st.b[j] && ta != st.a[j] ? 1 : 0;
    st.fb[j] = tb == net.slot_size( 2 * j + 1 ) ? 2 : tb == st.a[j] && tb != st.b[j] ? 0 : 1;
  }
  for ( uint32_t o = 0; o < net.num_pos(); ++o )
  {
    auto const s = net.num_node_slots() + o;
    st.po.push_back( pick( net.theta0, s, net.slot_size( s ) ) );
  }
  return st;
}

/* raises the chosen logit one above the slot maximum */
inline void force_pick( selector_net const& net, std::vector<double>& th, uint32_t s, uint32_t c )
{
  auto* z = th.data() + net.slot_offset( s );
  double m = z[0];
  for ( uint32_t i = 1; i < net.slot_width( s ); ++i )
    m = std::max( m, z[i] );
  if ( z[c] < m || std::count( z, z + net.slot_width( s ), m ) > 1 )
    z[c] = m + 1.0;
}

inline void write_state( selector_net& net, hard_state const& st )
{
  for ( uint32_t j = 0; j < net.num_nodes(); ++j )
  {
    force_pick( net, net.theta0, 2 * j, st.a[j] );
    force_pick( net, net.theta0, 2 * j + 1, st.b[j] );
    force_pick( net, net.theta1, 2 * j, st.fa[j] == 0 ? st.a[j] : st.b[j] );
    auto const s = 2 * j + 1;
    force_pick( net, net.theta1, s, st.fb[j] == 2 ? net.slot_size( s ) : st.fb[j] == 0 ? st.a[j] : st.b[j] );
  }
  for ( uint32_t o = 0; o < net.num_pos(); ++o )
  {
    auto const s = net.num_node_slots() + o;
    force_pick( net, net.theta0, s, st.po[o] );
    force_pick( net, net.theta1, s, st.po[o] );
  }
  net.pin_dummies();
}

} // namespace detail

/*! \brief Annealed local search over the hard selectors of a trained net.
 *
 * Each move rewires one appearance input, one function-side choice among
 * the node's own appearance inputs and the dummy, or one output driver
 * shared by both parameter sets, so the result has no containment
 * violations. The first phase anneals on the worse regime's hard accuracy
 * plus a tenth of their sum; the second walks at no loss of that score
 * towards fewer nodes reachable from the outputs. The net is replaced only
 * when its worse-regime accuracy does not drop. Deterministic in
 * (net, dataset, iterations, seed).
 */
inline refine_result refine( selector_net& net, mimicry_dataset const& d, uint32_t iterations, uint64_t seed )
{
  auto const p0 = detail::pack_regime( d, 0.0 );
  auto const p1 = detail::pack_regime( d, 1.0 );
  std::vector<uint64_t> scratch;
  std::vector<uint32_t> stack;
  std::vector<uint8_t> seen;
  auto st = detail::read_state( net );
  /* nodes reachable from the outputs; function edges are a subset of appearance edges */
  auto retained = [&]( detail::hard_state const& s ) {
    auto const np = net.num_pis();
    seen.assign( net.num_nodes(), 0 );
    uint32_t count = 0;
    auto visit = [&]( uint32_t sig ) {
      if ( sig >= np && !seen[sig - np] )
      {
        seen[sig - np] = 1;
        ++count;
        stack.push_back( sig - np );
      }
    };
    for ( auto x : s.po )
      visit( x );
    while ( !stack.empty() )
    {
      auto const j = stack.back();
      stack.pop_back();
      visit( s.a[j] );
      visit( s.b[j] );
    }
    return count;
  };
  auto eval = [&]( detail::hard_state const& s, double& x0, double& x1 ) {
    x0 = detail::packed_accuracy( net, s, p0, false, scratch );
    x1 = detail::packed_accuracy( net, s, p1, true, scratch );
    return std::min( x0, x1 ) + 0.1 * ( x0 + x1 );
  };
  refine_result r;
  double x0, x1;
  double cur = eval( st, x0, x1 );
  auto best = st;
  double best_score = cur;
  r.acc_p0 = x0;
  r.acc_p1 = x1;

  random_source rng( seed );
  auto const n = net.num_nodes();
  auto const npo = net.num_pos();
  uint32_t j = 0, old_u = 0;
  uint64_t move = 0;
  uint8_t old_c = 0;
  auto mutate = [&] {
    j = static_cast<uint32_t>( rng.below( n ) );
    move = rng.below( 10 );
    if ( move < 3 )
    {
      old_u = st.a[j];
      st.a[j] = static_cast<uint32_t>( rng.below( net.slot_size( 2 * j ) ) );
    }
    else if ( move < 6 )
    {
      old_u = st.b[j];
      st.b[j] = static_cast<uint32_t>( rng.below( net.slot_size( 2 * j + 1 ) ) );
    }
    else if ( move < 7 )
    {
      old_c = st.fa[j];
      st.fa[j] ^= 1;
    }
    else if ( move < 9 )
    {
      old_c = st.fb[j];
      st.fb[j] = static_cast<uint8_t>( ( st.fb[j] + 1 + rng.below( 2 ) ) % 3 );
    }
    else
    {
      old_u = st.po[j % npo];
      st.po[j % npo] = static_cast<uint32_t>( rng.below( net.slot_size( net.num_node_slots() + j % npo ) ) );
    }
  };
  auto undo = [&] {
    if ( move < 3 )
      st.a[j] = old_u;
    else if ( move < 6 )
      st.b[j] = old_u;
    else if ( move < 7 )
      st.fa[j] = old_c;
    else if ( move < 9 )
      st.fb[j] = old_c;
    else
      st.po[j % npo] = old_u;
  };

  /* phase 1: anneal on accuracy */
  for ( uint32_t it = 0; it < iterations && n > 0; ++it )
  {
    auto const temp = 2.0 * std::pow( 1e-3, static_cast<double>( it ) / iterations );
    mutate();
    double y0, y1;
    auto const score = eval( st, y0, y1 );
    if ( score >= cur || rng.uniform() < std::exp( ( score - cur ) / temp ) )
    {
      cur = score;
      if ( score > best_score )
      {
        best_score = score;
        best = st;
      }
      continue;
    }
    undo();
  }

  /* phase 2: shrink the retained node set without losing accuracy */
  st = best;
  auto size = retained( st );
  for ( uint32_t it = 0; it < iterations && n > 0; ++it )
  {
    mutate();
    double y0, y1;
    auto const score = eval( st, y0, y1 );
    auto const sz = score >= best_score ? retained( st ) : size + 1;
    if ( sz <= size )
    {
      size = sz;
      best_score = score;
      continue;
    }
    undo();
  }
  best = st;

  eval( best, x0, x1 );
  auto const before = std::min( hard_accuracy( net, d, 0.0 ), hard_accuracy( net, d, 1.0 ) );
  if ( std::min( x0, x1 ) >= before )
  {
    detail::write_state( net, best );
    r.acc_p0 = x0;
    r.acc_p1 = x1;
    r.improved = true;
  }
  else
  {
    r.acc_p0 = hard_accuracy( net, d, 0.0 );
    r.acc_p1 = hard_accuracy( net, d, 1.0 );
  }
  return r;
}

/*! \brief Trains `restarts` independent runs and returns the best snapshot, refined.
 *
 * A snapshot's score is its worst-regime hard accuracy, heavily penalized
 * when the containment-violation fraction exceeds 5%. The returned trace
 * is that of the winning run and covers gradient epochs only; the returned
 * net is then passed through `refine` unless epochs or refine_iterations
 * is zero. Deterministic in (dataset, shape, cfg).
 */
inline train_result train( mimicry_dataset const& d, net_shape const& shape, train_config const& cfg )
{
  if ( !cfg.valid() )
    throw mimic_error( "invalid training configuration" );
  if ( d.rows.empty() )
    throw mimic_error( "train: empty dataset" );
  if ( shape.num_pis != d.num_pis() || shape.num_pos != d.num_pos() )
    throw mimic_error( "train: net shape does not match the dataset ports" );
  std::optional<train_result> best;
  double best_score = -std::numeric_limits<double>::infinity();
  for ( uint32_t r = 0; r < cfg.restarts; ++r )
  {
    auto run = detail::train_once( d, shape, cfg, r == 0 ? cfg.seed : derive_seed( cfg.seed, 100 + r ) );
    run.best_restart = r;
    if ( run.diverged )
    {
      if ( !best )
        best = std::move( run );
      continue;
    }
    auto const& e = run.trace[run.best_epoch];
    auto const score = detail::snapshot_score( e.acc_p0, e.acc_p1, e.violation_fraction );
    if ( !best || best->diverged || score > best_score )
    {
      best_score = score;
      best = std::move( run );
    }
    if ( best_score >= 100.0 - 1e-9 )
      break;
  }
  auto& res = *best;
  res.refined_acc_p0 = hard_accuracy( res.net, d, 0.0 );
  res.refined_acc_p1 = hard_accuracy( res.net, d, 1.0 );
  if ( !res.diverged && cfg.epochs > 0 && cfg.refine_iterations > 0 && res.net.num_nodes() > 0 )
  {
    uint64_t rows0 = 0, rows1 = 0;
    for ( auto const& r : d.rows )
      ( r.p == 0.0 ? rows0 : rows1 ) += 1;
    auto const work = double( res.net.num_nodes() ) * double( ( rows0 + 63 ) / 64 + ( rows1 + 63 ) / 64 );
    auto const iters = static_cast<uint32_t>( std::min<double>( cfg.refine_iterations, std::floor( cfg.refine_budget / work ) ) );
    auto const rr = refine( res.net, d, iters, derive_seed( cfg.seed, 7 ) );
    res.refined_acc_p0 = rr.acc_p0;
    res.refined_acc_p1 = rr.acc_p1;
    res.refined = rr.improved;
  }
  return std::move( res );
}

/*! \brief Trace CSV: epoch, loss_total, loss_hardness, loss_reg, loss_cryptic, acc_p0, acc_p1. */
inline std::string trace_csv( std::vector<epoch_record> const& trace )
{
  std::string s = "epoch,loss_total,loss_hardness,loss_reg,loss_cryptic,acc_p0,acc_p1\n";
  char buf[256];
  for ( auto const& e : trace )
  {
    std::snprintf( buf, sizeof buf, "%u,%.10g,%.10g,%.10g,%.10g,%.6g,%.6g\n", e.epoch, e.loss.total, e.loss.hardness, e.loss.reg,
                   e.loss.cryptic, e.acc_p0, e.acc_p1 );
    s += buf;
  }
  return s;
}

struct extraction
{
  camouflaged_netlist camo;
  containment_report report;
};

/*! \brief The NAND array realized by the argmax selectors.
 *
 * Apparent inputs follow theta0, true inputs theta1; a theta1 slot on the
 * dummy makes that apparent input a dummy input. Nodes unreachable
 * from the counted POs are dropped. A true input missing from the
 * apparent fan-in is appended to it (and counted as a violation), which
 * keeps the cell legal. Output ports carry F's names and are driven by the
 * theta1 choice; appearance-only outputs are driven by the theta0 choice.
 */
inline extraction extract( selector_net const& net, port_unification const& u )
{
  if ( u.pi_names.size() != net.num_pis() || u.po_names.size() != net.num_pos() )
    throw mimic_error( "extract: port map does not match the net" );
  extraction x;
  x.report = containment( net, u );
  auto const np = net.num_pis();
  auto pick = [&]( std::vector<double> const& th, uint32_t s ) {
    return detail::argmax( th.data() + net.slot_offset( s ), net.slot_width( s ) );
  };

  std::unordered_set<std::string> taken( u.pi_names.begin(), u.pi_names.end() );
  std::vector<std::string> id( net.num_signals() );
  for ( uint32_t i = 0; i < np; ++i )
  {
    id[i] = u.pi_names[i];
    x.camo.cells.push_back( identity_cell( id[i], { gate_type::input, {} } ) );
    x.camo.pis.push_back( { id[i], u.pi_names[i] } );
  }
  for ( uint32_t j = 0; j < net.num_nodes(); ++j )
  {
    if ( !x.report.kept[j] )
      continue;
    id[np + j] = detail::unique_name( "g" + std::to_string( j ), taken );
    gate_spec app{ gate_type::nand, { id[pick( net.theta0, 2 * j )], id[pick( net.theta0, 2 * j + 1 )] } };
    auto const ta = pick( net.theta1, 2 * j ), tb = pick( net.theta1, 2 * j + 1 );
    /* a dummy second slot leaves NAND(a, a) = NOT a */
    gate_spec tru{ gate_type::nand, { id[ta], id[tb < net.slot_size( 2 * j + 1 ) ? tb : ta] } };
    for ( auto const& s : tru.inputs )
    {
      if ( std::find( app.inputs.begin(), app.inputs.end(), s ) == app.inputs.end() )
        app.inputs.push_back( s );
    }
    x.camo.cells.push_back( make_cell( id[np + j], std::move( app ), std::move( tru ) ) );
  }
  for ( uint32_t o = 0; o < net.num_pos(); ++o )
  {
    auto const s = net.num_node_slots() + o;
    auto const& th = u.f_po[o] >= 0 ? net.theta1 : net.theta0;
    x.camo.pos.push_back( { id[pick( th, s )], u.po_names[o] } );
  }
  return x;
}

/*! \brief Default port names x0.. and y0.., all ports present in both circuits. */
inline port_unification default_ports( selector_net const& net )
{
  port_unification u;
  for ( uint32_t i = 0; i < net.num_pis(); ++i )
  {
    u.pi_names.push_back( "x" + std::to_string( i ) );
    u.a_pi.push_back( static_cast<int32_t>( i ) );
    u.f_pi.push_back( static_cast<int32_t>( i ) );
  }
  for ( uint32_t o = 0; o < net.num_pos(); ++o )
  {
    u.po_names.push_back( "y" + std::to_string( o ) );
    u.a_po.push_back( static_cast<int32_t>( o ) );
    u.f_po.push_back( static_cast<int32_t>( o ) );
  }
  return u;
}

inline extraction extract( selector_net const& net )
{
  return extract( net, default_ports( net ) );
}

/*! \brief Checkpoint: shape, both parameter sets (slot-major), tau, seed, epoch. */
inline nlohmann::json checkpoint_to_json( selector_net const& net, uint64_t seed, uint32_t epoch )
{
  return { { "shape", { { "num_pis", net.num_pis() }, { "num_pos", net.num_pos() }, { "layers", net.shape().layers } } },
           { "theta0", net.theta0 },
           { "theta1", net.theta1 },
           { "tau", net.tau },
           { "seed", seed },
           { "epoch", epoch } };
}

inline selector_net checkpoint_from_json( nlohmann::json const& j )
{
  try
  {
    net_shape shape{ j.at( "shape" ).at( "num_pis" ).get<uint32_t>(), j.at( "shape" ).at( "num_pos" ).get<uint32_t>(),
                     j.at( "shape" ).at( "layers" ).get<std::vector<uint32_t>>() };
    selector_net net( shape );
    net.theta0 = j.at( "theta0" ).get<std::vector<double>>();
    net.theta1 = j.at( "theta1" ).get<std::vector<double>>();
    net.tau = j.at( "tau" ).get<double>();
    if ( net.theta0.size() != net.num_params() || net.theta1.size() != net.num_params() )
      throw mimic_error( "checkpoint: parameter count does not match the shape" );
    if ( !( net.tau > 0 ) )
      throw mimic_error( "checkpoint: tau must be positive" );
    return net;
  }
  catch ( nlohmann::json::exception const& e )
  {
    throw mimic_error( std::string( "checkpoint: " ) + e.what() );
  }
}

} // namespace mimic
