// Copyright 2026 The VP-NTK Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef VPNTK_LINALG_H_
#define VPNTK_LINALG_H_

#include <Eigen/Dense>

namespace vpntk {

using Vector = Eigen::VectorXd;
// Row-major so that a matrix maps onto a flat parameter block in the order
// the checkpoint format and the NTK feature layout use.
using RowMatrix =
    Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Matrix = Eigen::MatrixXd;

}  // namespace vpntk

#endif  // VPNTK_LINALG_H_
