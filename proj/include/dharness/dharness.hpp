/*
 * Copyright (c) 2026 The dharness Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#pragma once

// Umbrella header.

#include "dharness/bench.hpp"
#include "dharness/bus.hpp"
#include "dharness/device.hpp"
#include "dharness/doubles.hpp"
#include "dharness/dut.hpp"
#include "dharness/error.hpp"
#include "dharness/harness.hpp"
#include "dharness/nmea.hpp"
#include "dharness/rtc_registers.hpp"
#include "dharness/simcore.hpp"
#include "dharness/suites.hpp"
#include "dharness/transport.hpp"
