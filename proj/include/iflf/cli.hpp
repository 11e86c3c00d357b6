// iflf/cli.hpp

// Copyright 2026  IFLF Authors

// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//  http://www.apache.org/licenses/LICENSE-2.0
//
// THIS CODE IS PROVIDED *AS IS* BASIS, WITHOUT WARRANTIES OR CONDITIONS OF ANY
// KIND, EITHER EXPRESS OR IMPLIED, INCLUDING WITHOUT LIMITATION ANY IMPLIED
// WARRANTIES OR CONDITIONS OF TITLE, FITNESS FOR A PARTICULAR PURPOSE,
// MERCHANTABLITY OR NON-INFRINGEMENT.
// See the Apache 2 License for the specific language governing permissions and
// limitations under the License.

#ifndef IFLF_CLI_HPP_
#define IFLF_CLI_HPP_

namespace iflf {

// Exit codes: 0 success, 2 configuration error, 3 data error,
// 4 training divergence.
int run_cli(int argc, char **argv);

}  // namespace iflf

#endif  // IFLF_CLI_HPP_
