/* The public header must compile as C and the library must be usable from C. */
#include <stdio.h>
#include <string.h>

#include "mvb/mvbismut.h"

int main(void) {
  const double a[] = {0.0, 0.0, 1.0, 1.0};
  const double b[] = {1.0, 0.0, 2.0, 1.0};
  mvb_measure* mu = NULL;
  mvb_measure* nu = NULL;
  double w = 0.0;
  if (mvb_measure_create(2, 2, a, &mu) != MVB_OK || mvb_measure_create(2, 2, b, &nu) != MVB_OK) return 1;
  if (mvb_wasserstein(mu, nu, 2.0, &w) != MVB_OK || w != 1.0) return 1;
  mvb_measure_free(mu);
  mvb_measure_free(nu);

  mvb_config* cfg = NULL;
  if (mvb_config_parse("[experiment]\nscenario = brownian\n", &cfg) != MVB_OK) return 1;
  mvb_config_free(cfg);
  if (mvb_config_parse("[experiment]\nN = lots\n", &cfg) != MVB_ERR_CONFIG) return 1;
  if (strlen(mvb_last_error()) == 0) return 1;
  printf("mvbismut %s\n", mvb_version());
  return 0;
}
