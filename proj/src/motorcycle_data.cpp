// Silverman (1985) simulated motorcycle crash: time (ms) and head acceleration (g).
#include "hetgp/datasets.hpp"

namespace hetgp {

namespace {

constexpr double kMotorcycle[][2] = {
    {2.4, 0}, {2.6, -1.3}, {3.2, -2.7}, {3.6, 0}, {4, -2.7}, {6.2, -2.7},
    {6.6, -2.7}, {6.8, -1.3}, {7.8, -2.7}, {8.2, -2.7}, {8.8, -1.3}, {8.8, -2.7},
    {9.6, -2.7}, {10, -2.7}, {10.2, -5.4}, {10.6, -2.7}, {11, -5.4}, {11.4, 0},
    {13.2, -2.7}, {13.6, -2.7}, {13.8, 0}, {14.6, -13.3}, {14.6, -5.4}, {14.6, -5.4},
    {14.6, -9.3}, {14.6, -16}, {14.6, -22.8}, {14.8, -2.7}, {15.4, -22.8}, {15.4, -32.1},
    {15.4, -53.5}, {15.4, -54.9}, {15.6, -40.2}, {15.6, -21.5}, {15.8, -21.5}, {15.8, -50.8},
    {16, -42.9}, {16, -26.8}, {16.2, -21.5}, {16.2, -50.8}, {16.2, -61.7}, {16.4, -5.4},
    {16.4, -80.4}, {16.6, -59}, {16.8, -71}, {16.8, -91.1}, {16.8, -77.7}, {17.6, -37.5},
    {17.6, -85.6}, {17.6, -123.1}, {17.6, -101.9}, {17.8, -99.1}, {17.8, -104.4}, {18.6, -112.5},
    {18.6, -50.8}, {19.2, -123.1}, {19.4, -85.6}, {19.4, -72.3}, {19.6, -127.2}, {20.2, -123.1},
    {20.4, -117.9}, {21.2, -134}, {21.4, -101.9}, {21.8, -108.4}, {22, -123.1}, {23.2, -123.1},
    {23.4, -128.5}, {24, -112.5}, {24.2, -95.1}, {24.2, -81.8}, {24.6, -53.5}, {25, -64.4},
    {25, -57.6}, {25.4, -72.3}, {25.4, -44.3}, {25.6, -26.8}, {26, -5.4}, {26.2, -107.1},
    {26.2, -21.5}, {26.4, -65.6}, {27, -16}, {27.2, -45.6}, {27.2, -24.2}, {27.2, 9.5},
    {27.6, 4}, {28.2, 12}, {28.4, -21.5}, {28.4, 37.5}, {28.6, 46.9}, {29.4, -17.4},
    {30.2, 36.2}, {31, 75}, {31.2, 8.1}, {32, 54.9}, {32, 48.2}, {32.8, 46.9},
    {33.4, 16}, {33.8, 45.6}, {34.4, 1.3}, {34.8, 75}, {35.2, -16}, {35.2, -54.9},
    {35.4, 69.6}, {35.6, 34.8}, {35.6, 32.1}, {36.2, -37.5}, {36.2, 22.8}, {38, 46.9},
    {38, 10.7}, {39.2, 5.4}, {39.4, -1.3}, {40, -21.5}, {40.4, -13.3}, {41.6, 30.8},
    {41.6, -10.7}, {42.4, 29.4}, {42.8, 0}, {42.8, -10.7}, {43, 14.7}, {44, -1.3},
    {44.4, 0}, {45, 10.7}, {46.6, 10.7}, {47.8, -26.8}, {47.8, -14.7}, {48.8, -13.3},
    {50.6, 0}, {52, 10.7}, {53.2, -14.7}, {55, -2.7}, {55, 10.7}, {55.4, -2.7},
    {57.6, 10.7},
};

}  // namespace

Dataset motorcycle() {
  constexpr auto n = static_cast<Eigen::Index>(std::size(kMotorcycle));
  Dataset ds;
  ds.name = "motorcycle";
  ds.X.resize(n, 1);
  ds.y.resize(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    ds.X(i, 0) = kMotorcycle[i][0];
    ds.y(i) = kMotorcycle[i][1];
  }
  return ds;
}

}  // namespace hetgp
