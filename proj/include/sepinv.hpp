#pragma once

#include "sepinv/envelope.hpp"
#include "sepinv/io.hpp"
#include "sepinv/lmi.hpp"
#include "sepinv/model.hpp"
#include "sepinv/polytope.hpp"
#include "sepinv/refine.hpp"
#include "sepinv/sdp.hpp"
#include "sepinv/sim.hpp"
#include "sepinv/slack_identities.hpp"
#include "sepinv/synth.hpp"
#include "sepinv/verify.hpp"
