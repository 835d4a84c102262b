#pragma once

#define WAVECTL_VERSION_MAJOR 0
#define WAVECTL_VERSION_MINOR 1
#define WAVECTL_VERSION_PATCH 0
#define WAVECTL_VERSION "0.1.0"
