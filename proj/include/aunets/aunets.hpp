#pragma once

#include "aunets/au.hpp"
#include "aunets/common.hpp"
#include "aunets/datakit/dataset.hpp"
#include "aunets/datakit/records.hpp"
#include "aunets/datakit/synthetic.hpp"
#include "aunets/detectors/heads.hpp"
#include "aunets/detectors/train.hpp"
#include "aunets/evalkit/metrics.hpp"
#include "aunets/evalkit/report.hpp"
#include "aunets/evalkit/saliency.hpp"
#include "aunets/image.hpp"
#include "aunets/motion/embed.hpp"
#include "aunets/motion/flow.hpp"
#include "aunets/motion/flow_cache.hpp"
#include "aunets/multiview/cascade.hpp"
#include "aunets/multiview/ensemble.hpp"
#include "aunets/multiview/view_classifier.hpp"
#include "aunets/netcore.hpp"
#include "aunets/temporal/median.hpp"
#include "aunets/view.hpp"
