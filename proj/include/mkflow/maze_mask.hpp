#pragma once

#include <string_view>

namespace mkflow {

// 64x64 maze raster: 3-cell-wide corridors, one clearly shortest route from
// the S block to the T block plus three dead-end branches. Rows run top to
// bottom.
inline constexpr std::string_view kMaze64Mask = R"mask(
################################################################
################################################################
##########################################...###################
##########################################...###################
##########################################...###################
##########################################...###################
##########################################...###################
##########################################...###################
##########################################...###################
##########................................................######
##########................................................######
##########................................................######
##############################...######################...######
##############################...######################...######
##############################...######################...######
##############################...######################...######
##############################...######################...######
##############################...######################...######
##############################...######################...######
##############################...######################...######
##############################...######################...######
##############################...######################...######
##############################...######################...######
##############################...######################...######
##############################...######################...######
##############################...######################...######
##############################...######################...######
##############################...######################...######
##############################...######################...######
##############################...######################...######
##SSS.........................................#########TTT######
##SSS.........................................#########TTT######
##SSS.........................................#########TTT######
##############################...######################...######
##############################...######################...######
##############################...######################...######
##############################...######################...######
##############################...######################...######
##############################...######################...######
##############################...######################...######
##############################...######################...######
##############################...######################...######
##############################...######################...######
##############################...######################...######
##############################...######################...######
##############################...######################...######
##############################...######################...######
##############################...######################...######
##############################...######################...######
##############################...######################...######
##############################...######################...######
##############################...######################...######
##############################...######################...######
##############################...######################...######
##############################...######################...######
##############################...######################...######
##############################...######################...######
##########................................................######
##########................................................######
##########................................................######
################################################################
################################################################
################################################################
################################################################
)mask";

}  // namespace mkflow
