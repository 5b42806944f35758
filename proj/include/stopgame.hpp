#pragma once

#include "stopgame/disorder.hpp"
#include "stopgame/dynkin_game.hpp"
#include "stopgame/errors.hpp"
#include "stopgame/markov.hpp"
#include "stopgame/rng.hpp"
#include "stopgame/sensor_net.hpp"
#include "stopgame/simple_game.hpp"
#include "stopgame/voting_game.hpp"
