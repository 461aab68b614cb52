/*!
  \file selector.hpp
  \brief Triangular NAND network with dual selector parameters

  Every node is a 2-input NAND whose inputs are chosen by two selector
  slots over all earlier signals (PIs and nodes of lower layers). Each PO
  has one selector over all signals. Two parameter sets exist: theta0
  realizes the appearance circuit (p = 0), theta1 the functional circuit
  (p = 1); the network runs on their interpolation. Losses and their
  gradients are computed by a hand-written reverse pass.
*/

#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "errors.hpp"
#include "random.hpp"

namespace mimic
{

enum class select_mode
{
  soft,
  gumbel,
  hard
};

struct net_shape
{
  uint32_t num_pis{ 0 };
  uint32_t num_pos{ 0 };
  std::vector<uint32_t> layers;

  bool operator==( net_shape const& ) const = default;
};

/*! \brief [2n, 2n, n, n] for n inputs, scaled down to at most `cap` nodes. */
inline net_shape default_shape( uint32_t num_pis, uint32_t num_pos, uint32_t cap = 256 )
{
  auto n = std::max( 1u, num_pis );
  if ( 6 * n > cap )
    n = std::max( 1u, cap / 6 );
  return { num_pis, num_pos, { 2 * n, 2 * n, n, n } };
}

class selector_net
{
public:
  selector_net() = default;

  explicit selector_net( net_shape shape ) : shape_( std::move( shape ) )
  {
    if ( shape_.num_pos == 0 )
      throw mimic_error( "selector net needs at least one output" );
    if ( shape_.num_pis == 0 )
      throw mimic_error( "selector net needs at least one input" );
    for ( auto w : shape_.layers )
    {
      if ( w == 0 )
        throw mimic_error( "selector net layers must be nonempty" );
    }
    layer_.assign( shape_.num_pis, 0u );
    uint32_t first = shape_.num_pis;
    for ( uint32_t l = 0; l < shape_.layers.size(); ++l )
    {
      for ( uint32_t i = 0; i < shape_.layers[l]; ++i )
      {
        layer_.push_back( l + 1 );
        for ( uint32_t k = 0; k < 2; ++k )
        {
          offset_.push_back( params_ );
          size_.push_back( first );
          params_ += first + k;
        }
      }
      first += shape_.layers[l];
    }
    for ( uint32_t o = 0; o < shape_.num_pos; ++o )
    {
      offset_.push_back( params_ );
      size_.push_back( first );
      params_ += first;
    }
    theta0.assign( params_, 0.0 );
    theta1.assign( params_, 0.0 );
    pin_dummies();
  }

  net_shape const& shape() const { return shape_; }
  uint32_t num_pis() const { return shape_.num_pis; }
  uint32_t num_pos() const { return shape_.num_pos; }
  uint32_t num_layers() const { return static_cast<uint32_t>( shape_.layers.size() ); }
  uint32_t num_nodes() const { return static_cast<uint32_t>( layer_.size() ) - shape_.num_pis; }
  uint32_t num_signals() const { return static_cast<uint32_t>( layer_.size() ); }
  /*! \brief Node slots 2j and 2j+1 feed node j; slot 2N+o drives PO o. */
  uint32_t num_slots() const { return static_cast<uint32_t>( offset_.size() ); }
  uint32_t num_node_slots() const { return 2 * num_nodes(); }
  std::size_t num_params() const { return params_; }
  std::size_t slot_offset( uint32_t s ) const { return offset_[s]; }
  /*! \brief Real candidates of a slot are signals [0, slot_size). */
  uint32_t slot_size( uint32_t s ) const { return size_[s]; }
  /*! \brief The second slot of every node also has a dummy candidate, stored after the signals. */
  bool has_dummy( uint32_t s ) const { return s < num_node_slots() && ( s & 1u ); }
  /*! \brief Logits in a slot: slot_size plus one for the dummy. */
  uint32_t slot_width( uint32_t s ) const { return size_[s] + ( has_dummy( s ) ? 1u : 0u ); }
  /*! \brief Index of a slot's dummy logit in the parameter vectors. */
  std::size_t dummy_index( uint32_t s ) const { return offset_[s] + size_[s]; }

  /*! \brief Logit that keeps the dummy out of the appearance set. */
  static constexpr double dummy_off = -1000.0;

  /*! \brief Resets theta0's dummy logits to `dummy_off`. */
  void pin_dummies()
  {
    for ( uint32_t s = 1; s < num_node_slots(); s += 2 )
      theta0[dummy_index( s )] = dummy_off;
  }
  /*! \brief 0 for PIs, 1.. for node layers. */
  uint32_t signal_layer( uint32_t sig ) const { return layer_[sig]; }
  /*! \brief Layer of the node a slot feeds; PO slots report num_layers() + 1. */
  uint32_t slot_layer( uint32_t s ) const { return s < num_node_slots() ? layer_[num_pis() + s / 2] : num_layers() + 1; }

  std::vector<double> theta0;
  std::vector<double> theta1;
  double tau{ 1.0 };

private:
  net_shape shape_;
  std::vector<uint32_t> layer_;
  std::vector<std::size_t> offset_;
  std::vector<uint32_t> size_;
  std::size_t params_{ 0 };
};

/*! \brief Elementwise p * theta1 + (1 - p) * theta0. */
inline std::vector<double> effective_params( std::span<double const> theta0, std::span<double const> theta1, double p )
{
  if ( theta0.size() != theta1.size() )
    throw mimic_error( "effective_params: parameter sets differ in size" );
  std::vector<double> r( theta0.size() );
  for ( std::size_t i = 0; i < r.size(); ++i )
    r[i] = p == 1.0 ? theta1[i] : p == 0.0 ? theta0[i] : p * theta1[i] + ( 1.0 - p ) * theta0[i];
  return r;
}

namespace detail
{

/*! \brief out = softmax(z / tau) over n entries. */
inline void softmax( double const* z, uint32_t n, double tau, double* out )
{
  double m = -std::numeric_limits<double>::infinity();
  for ( uint32_t i = 0; i < n; ++i )
    m = std::max( m, z[i] );
  double sum = 0.0;
  for ( uint32_t i = 0; i < n; ++i )
  {
    out[i] = std::exp( ( z[i] - m ) / tau );
    sum += out[i];
  }
  for ( uint32_t i = 0; i < n; ++i )
    out[i] /= sum;
}

/*! \brief Adds d/dz of softmax(z / tau) given upstream g_w. */
inline void softmax_backward( double const* w, double const* gw, uint32_t n, double tau, double scale, double* gz )
{
  double dot = 0.0;
  for ( uint32_t i = 0; i < n; ++i )
    dot += w[i] * gw[i];
  for ( uint32_t i = 0; i < n; ++i )
    gz[i] += scale * w[i] * ( gw[i] - dot ) / tau;
}

/*! \brief First index of the maximum. */
inline uint32_t argmax( double const* z, uint32_t n )
{
  uint32_t best = 0;
  for ( uint32_t i = 1; i < n; ++i )
  {
    if ( z[i] > z[best] )
      best = i;
  }
  return best;
}

} // namespace detail

/*! \brief Selector weights of every slot for parameters `theta`.
 *
 * Soft: softmax(theta / tau). Gumbel: softmax((theta + g) / tau) with one
 * standard Gumbel draw per candidate from `rng`. Hard: one-hot argmax.
 */
inline std::vector<double> slot_weights( selector_net const& net, std::span<double const> theta, select_mode mode,
                                         random_source* rng = nullptr )
{
  std::vector<double> w( net.num_params(), 0.0 );
  std::vector<double> z;
  for ( uint32_t s = 0; s < net.num_slots(); ++s )
  {
    auto const off = net.slot_offset( s );
    auto const n = net.slot_width( s );
    if ( mode == select_mode::hard )
    {
      w[off + detail::argmax( theta.data() + off, n )] = 1.0;
      continue;
    }
    if ( mode == select_mode::gumbel )
    {
      if ( !rng )
        throw mimic_error( "gumbel selection needs a random source" );
      z.assign( theta.begin() + static_cast<std::ptrdiff_t>( off ), theta.begin() + static_cast<std::ptrdiff_t>( off + n ) );
      for ( auto& x : z )
        x += rng->gumbel();
      detail::softmax( z.data(), n, net.tau, w.data() + off );
    }
    else
      detail::softmax( theta.data() + off, n, net.tau, w.data() + off );
  }
  return w;
}

/*! \brief Evaluates all signals for one input row under fixed slot weights; returns the POs. */
inline std::vector<double> forward_weights( selector_net const& net, std::span<double const> w, std::span<double const> pis,
                                            std::vector<double>* signals = nullptr )
{
  if ( pis.size() != net.num_pis() )
    throw mimic_error( "forward: expected " + std::to_string( net.num_pis() ) + " inputs, got " + std::to_string( pis.size() ) );
  std::vector<double> local;
  auto& s = signals ? *signals : local;
  s.assign( net.num_signals(), 0.0 );
  std::copy( pis.begin(), pis.end(), s.begin() );
  auto dot = [&]( uint32_t slot ) {
    auto const* ws = w.data() + net.slot_offset( slot );
    double x = 0.0;
    auto const n = net.slot_size( slot );
    for ( uint32_t c = 0; c < n; ++c )
      x += ws[c] * s[c];
    return net.has_dummy( slot ) ? x + ws[n] : x;
  };
  for ( uint32_t j = 0; j < net.num_nodes(); ++j )
    s[net.num_pis() + j] = 1.0 - dot( 2 * j ) * dot( 2 * j + 1 );
  std::vector<double> out( net.num_pos() );
  for ( uint32_t o = 0; o < net.num_pos(); ++o )
    out[o] = dot( net.num_node_slots() + o );
  return out;
}

/*! \brief PO values for one input row at interpolation point p. */
inline std::vector<double> forward( selector_net const& net, std::span<double const> pis, double p, select_mode mode, uint64_t seed = 0 )
{
  random_source rng( seed );
  auto const eff = effective_params( net.theta0, net.theta1, p );
  auto const w = slot_weights( net, eff, mode, &rng );
  return forward_weights( net, w, pis );
}

/*! \brief Hard-mode PO bits for one input row of bits. */
inline std::vector<bool> forward_hard( selector_net const& net, std::vector<bool> const& pis, double p )
{
  std::vector<double> in( pis.begin(), pis.end() );
  auto const out = forward( net, in, p, select_mode::hard );
  std::vector<bool> r( out.size() );
  for ( std::size_t o = 0; o < out.size(); ++o )
    r[o] = out[o] > 0.5;
  return r;
}

/*! \brief (1 + |e|)^gamma * BCE for one bit. */
inline double hardness_term( double pred, double target, double gamma )
{
  constexpr double eps = 1e-12;
  auto const y = std::clamp( pred, eps, 1.0 - eps );
  auto const bce = -( target * std::log( y ) + ( 1.0 - target ) * std::log( 1.0 - y ) );
  return std::pow( 1.0 + std::abs( pred - target ), gamma ) * bce;
}

/*! \brief d/dpred of hardness_term; the clamp is passed straight through. */
inline double hardness_grad( double pred, double target, double gamma )
{
  constexpr double eps = 1e-12;
  auto const y = std::clamp( pred, eps, 1.0 - eps );
  auto const e = pred - target;
  auto const a = std::abs( e );
  auto const bce = -( target * std::log( y ) + ( 1.0 - target ) * std::log( 1.0 - y ) );
  auto const dbce = ( y - target ) / ( y * ( 1.0 - y ) );
  auto const w = std::pow( 1.0 + a, gamma );
  auto const dw = e == 0.0 ? 0.0 : gamma * std::pow( 1.0 + a, gamma - 1.0 ) * ( e > 0 ? 1.0 : -1.0 );
  return dw * bce + w * dbce;
}

/*! \brief Mean over bits of (1 + |pred - target|)^gamma * BCE(pred, target). */
inline double loss_hardness( std::span<double const> pred, std::span<double const> target, double gamma )
{
  if ( pred.size() != target.size() )
    throw mimic_error( "loss_hardness: size mismatch" );
  if ( pred.empty() )
    return 0.0;
  double sum = 0.0;
  for ( std::size_t i = 0; i < pred.size(); ++i )
    sum += hardness_term( pred[i], target[i], gamma );
  return sum / static_cast<double>( pred.size() );
}

/*! \brief Expected normalized layer gap over all node slots.
 *
 * A slot of a node in layer l choosing a signal of layer lc has gap
 * l - 1 - lc; gaps are divided by the largest possible one (layers - 1).
 * The dummy candidate has gap 0. Adds d/dtheta to `grad` when given.
 */
inline double loss_reg( selector_net const& net, std::span<double const> theta, std::vector<double>* grad = nullptr, double scale = 1.0 )
{
  auto const slots = net.num_node_slots();
  if ( net.num_layers() < 2 || slots == 0 )
    return 0.0;
  auto const max_gap = static_cast<double>( net.num_layers() - 1 );
  std::vector<double> w, g;
  double total = 0.0;
  for ( uint32_t s = 0; s < slots; ++s )
  {
    auto const off = net.slot_offset( s );
    auto const n = net.slot_size( s );
    auto const width = net.slot_width( s );
    auto const l = net.slot_layer( s );
    w.resize( width );
    detail::softmax( theta.data() + off, width, net.tau, w.data() );
    g.assign( width, 0.0 );
    for ( uint32_t c = 0; c < n; ++c )
    {
      g[c] = static_cast<double>( l - 1 - net.signal_layer( c ) ) / max_gap / slots;
      total += w[c] * g[c];
    }
    if ( grad )
      detail::softmax_backward( w.data(), g.data(), width, net.tau, scale, grad->data() + off );
  }
  return total;
}

/*! \brief Containment loss: sum over slots and real candidates of max(0, w1 - w0).
 *
 * w = softmax(theta / tau) per slot. Moving theta1's mass onto the dummy is
 * free, so a node may drop an apparent input but never gain one. Adds
 * gradients when given.
 */
inline double loss_cryptic( selector_net const& net, std::vector<double>* grad0 = nullptr, std::vector<double>* grad1 = nullptr,
                            double scale = 1.0 )
{
  std::vector<double> w0, w1, g0, g1;
  double total = 0.0;
  auto const want = grad0 && grad1;
  for ( uint32_t s = 0; s < net.num_slots(); ++s )
  {
    auto const n = net.slot_size( s );
    auto const width = net.slot_width( s );
    auto const off = net.slot_offset( s );
    w0.resize( width );
    w1.resize( width );
    detail::softmax( net.theta0.data() + off, width, net.tau, w0.data() );
    detail::softmax( net.theta1.data() + off, width, net.tau, w1.data() );
    g0.assign( width, 0.0 );
    g1.assign( width, 0.0 );
    bool any = false;
    for ( uint32_t c = 0; c < n; ++c )
    {
      if ( w1[c] <= w0[c] )
        continue;
      total += w1[c] - w0[c];
      any = true;
      g1[c] = 1.0;
      g0[c] = -1.0;
    }
    if ( want && any )
    {
      detail::softmax_backward( w0.data(), g0.data(), width, net.tau, scale, grad0->data() + off );
      detail::softmax_backward( w1.data(), g1.data(), width, net.tau, scale, grad1->data() + off );
    }
  }
  return total;
}

/*! \brief One training example: regime p, input bits, target bits, and which POs count. */
struct mimicry_row
{
  double p{ 0.0 };
  std::vector<double> in;
  std::vector<double> target;
  std::vector<uint8_t> mask;
};

struct train_config
{
  double lambda_reg{ 0.15 };
  double lambda_cryptic{ 10.0 };
  double learning_rate{ 0.01 };
  uint32_t epochs{ 2000 };
  /*! \brief Rows per step; 0 means the whole dataset. */
  uint32_t batch_size{ 0 };
  double tau_start{ 1.0 };
  double tau_end{ 0.1 };
  uint64_t seed{ 1 };
  double hardness_gamma{ 2.0 };
  select_mode mode{ select_mode::soft };
  /*! \brief Standard deviation of the initial logits; theta1 starts equal to theta0. */
  double init_scale{ 1.0 };
  /*! \brief Independent initializations; the best-scoring run is kept. */
  uint32_t restarts{ 1 };
  /*! \brief Forward through the argmax of the (noisy) selector weights, backward through their softmax. */
  bool straight_through{ false };
  /*! \brief Adam runs on theta0 and theta1 - theta0 rather than on theta0 and theta1. */
  bool shared_coordinates{ true };
  /*! \brief One Gumbel draw per step and regime instead of one per row. */
  bool shared_noise{ false };
  /*! \brief Fraction of the epochs over which lambda_cryptic ramps up linearly from 0. */
  double cryptic_warmup{ 0.0 };
  /*! \brief Local-search steps over the hard selectors after gradient training; 0 disables. */
  uint32_t refine_iterations{ 1000000 };
  /*! \brief Cap on refinement work in 64-row word operations; fewer steps are taken on large nets. */
  double refine_budget{ 4e9 };

  bool valid() const
  {
    return lambda_reg >= 0 && lambda_cryptic >= 0 && learning_rate > 0 && tau_start > 0 && tau_end > 0 && tau_end <= tau_start &&
           hardness_gamma >= 0 && init_scale >= 0 && restarts >= 1 && cryptic_warmup >= 0 && cryptic_warmup <= 1 &&
           refine_budget >= 0;
  }
};

struct loss_breakdown
{
  double total{ 0.0 };
  double hardness{ 0.0 };
  double reg{ 0.0 };
  double cryptic{ 0.0 };
};

/*! \brief Total loss over a batch, with gradients w.r.t. theta0 and theta1 when requested.
 *
 * hardness is averaged over all counted PO bits of the batch; reg is the
 * mean of loss_reg over both parameter sets. Gumbel draws come from
 * `noise_seed`, one per candidate per slot per row, in row order.
 */
inline loss_breakdown total_loss( selector_net const& net, std::span<mimicry_row const> batch, train_config const& cfg, select_mode mode,
                                  uint64_t noise_seed = 0, std::vector<double>* grad0 = nullptr, std::vector<double>* grad1 = nullptr )
{
  if ( batch.empty() )
    throw mimic_error( "total_loss: empty batch" );
  auto const want = grad0 && grad1;
  if ( want && mode == select_mode::hard )
    throw mimic_error( "total_loss: hard selection has no gradient" );
  if ( want )
  {
    grad0->assign( net.num_params(), 0.0 );
    grad1->assign( net.num_params(), 0.0 );
  }

  std::size_t bits = 0;
  for ( auto const& r : batch )
  {
    if ( r.in.size() != net.num_pis() || r.target.size() != net.num_pos() || r.mask.size() != net.num_pos() )
      throw mimic_error( "total_loss: row width does not match the net" );
    bits += static_cast<std::size_t>( std::count( r.mask.begin(), r.mask.end(), uint8_t( 1 ) ) );
  }
  auto const inv_bits = bits ? 1.0 / static_cast<double>( bits ) : 0.0;

  random_source rng( noise_seed );
  loss_breakdown lb;
  std::vector<double> eff, w, wf, gw, sig, gs;
  double group_p = std::numeric_limits<double>::quiet_NaN();

  /* pushes the accumulated slot-weight gradient of the current group into theta */
  auto flush = [&]() {
    if ( !want || w.empty() )
      return;
    std::vector<double> gz( net.num_params(), 0.0 );
    for ( uint32_t s = 0; s < net.num_slots(); ++s )
    {
      auto const off = net.slot_offset( s );
      detail::softmax_backward( w.data() + off, gw.data() + off, net.slot_width( s ), net.tau, 1.0, gz.data() + off );
    }
    for ( std::size_t i = 0; i < gz.size(); ++i )
    {
      ( *grad1 )[i] += group_p * gz[i];
      ( *grad0 )[i] += ( 1.0 - group_p ) * gz[i];
    }
  };

  for ( auto const& r : batch )
  {
    if ( ( mode == select_mode::gumbel && !cfg.shared_noise ) || !( r.p == group_p ) )
    {
      flush();
      group_p = r.p;
      eff = effective_params( net.theta0, net.theta1, r.p );
      w = slot_weights( net, eff, mode, &rng );
      wf = w;
      if ( cfg.straight_through )
      {
        for ( uint32_t s = 0; s < net.num_slots(); ++s )
        {
          auto const off = net.slot_offset( s );
          auto const n = net.slot_width( s );
          auto const best = detail::argmax( w.data() + off, n );
          std::fill_n( wf.begin() + static_cast<std::ptrdiff_t>( off ), n, 0.0 );
          wf[off + best] = 1.0;
        }
      }
      gw.assign( net.num_params(), 0.0 );
    }
    auto const out = forward_weights( net, wf, r.in, &sig );
    for ( uint32_t o = 0; o < net.num_pos(); ++o )
    {
      if ( r.mask[o] )
        lb.hardness += hardness_term( out[o], r.target[o], cfg.hardness_gamma ) * inv_bits;
    }
    if ( !want )
      continue;

    gs.assign( net.num_signals(), 0.0 );
    for ( uint32_t o = 0; o < net.num_pos(); ++o )
    {
      if ( !r.mask[o] )
        continue;
      auto const g = hardness_grad( out[o], r.target[o], cfg.hardness_gamma ) * inv_bits;
      auto const slot = net.num_node_slots() + o;
      auto const off = net.slot_offset( slot );
      for ( uint32_t c = 0; c < net.slot_size( slot ); ++c )
      {
        gs[c] += wf[off + c] * g;
        gw[off + c] += sig[c] * g;
      }
    }
    for ( uint32_t j = net.num_nodes(); j-- > 0; )
    {
      auto const g = gs[net.num_pis() + j];
      if ( g == 0.0 )
        continue;
      auto const oa = net.slot_offset( 2 * j ), ob = net.slot_offset( 2 * j + 1 );
      auto const n = net.slot_size( 2 * j );
      double x = 0.0, y = wf[ob + n];
      for ( uint32_t c = 0; c < n; ++c )
      {
        x += wf[oa + c] * sig[c];
        y += wf[ob + c] * sig[c];
      }
      auto const gx = -y * g, gy = -x * g;
      gw[ob + n] += gy;
      for ( uint32_t c = 0; c < n; ++c )
      {
        gs[c] += wf[oa + c] * gx + wf[ob + c] * gy;
        gw[oa + c] += sig[c] * gx;
        gw[ob + c] += sig[c] * gy;
      }
    }
  }
  flush();

  auto const half = 0.5 * cfg.lambda_reg;
  lb.reg = 0.5 * ( loss_reg( net, net.theta0, want ? grad0 : nullptr, half ) + loss_reg( net, net.theta1, want ? grad1 : nullptr, half ) );
  lb.cryptic = loss_cryptic( net, want ? grad0 : nullptr, want ? grad1 : nullptr, cfg.lambda_cryptic );
  lb.total = lb.hardness + cfg.lambda_reg * lb.reg + cfg.lambda_cryptic * lb.cryptic;
  if ( want )
  {
    for ( uint32_t s = 1; s < net.num_node_slots(); s += 2 )
      ( *grad0 )[net.dummy_index( s )] = 0.0;
  }
  return lb;
}

} // namespace mimic
