#pragma once

// Single point of inclusion for cpp-httplib so every translation unit
// sees the same feature macros.
#ifndef CPPHTTPLIB_OPENSSL_SUPPORT
#define CPPHTTPLIB_OPENSSL_SUPPORT
#endif
#include <httplib.h>
