#pragma once

#include "gdt/ablation.hpp"
#include "gdt/battery.hpp"
#include "gdt/bbox_regression.hpp"
#include "gdt/box.hpp"
#include "gdt/config.hpp"
#include "gdt/deform.hpp"
#include "gdt/gate.hpp"
#include "gdt/gradcheck.hpp"
#include "gdt/image.hpp"
#include "gdt/io.hpp"
#include "gdt/layers.hpp"
#include "gdt/metrics.hpp"
#include "gdt/network.hpp"
#include "gdt/optim.hpp"
#include "gdt/samples.hpp"
#include "gdt/synthseq.hpp"
#include "gdt/tensor.hpp"
#include "gdt/tracker.hpp"
#include "gdt/training.hpp"
