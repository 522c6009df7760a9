#pragma once

#include "darkdns/blocklist.hpp"
#include "darkdns/checkpoint.hpp"
#include "darkdns/classifier.hpp"
#include "darkdns/clock.hpp"
#include "darkdns/config.hpp"
#include "darkdns/ct_ingest.hpp"
#include "darkdns/error.hpp"
#include "darkdns/feed.hpp"
#include "darkdns/metrics.hpp"
#include "darkdns/pipeline.hpp"
#include "darkdns/probe.hpp"
#include "darkdns/rdap.hpp"
#include "darkdns/suffix.hpp"
#include "darkdns/time.hpp"
#include "darkdns/zone_store.hpp"
