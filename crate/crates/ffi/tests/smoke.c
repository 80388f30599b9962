#include <math.h>
#include <stdio.h>
#include <string.h>

#include "rootprobe.h"

#define CHECK(cond)                                                   \
  do {                                                                \
    if (!(cond)) {                                                    \
      const char *msg = rp_last_error_message();                      \
      fprintf(stderr, "%s:%d: %s (%s)\n", __FILE__, __LINE__, #cond,  \
              msg ? msg : "no error message");                        \
      return 1;                                                       \
    }                                                                 \
  } while (0)

int main(void) {
  RpAnswerer *model = NULL;
  CHECK(rp_answerer_new("oracle:type:7", 1, &model) == RP_STATUS_OK);

  RpAnalysisConfig config = rp_analysis_config_default();
  CHECK(config.n_samples == 1000);
  config.n_samples = 200;

  const char *context = "Walls of the Grand Canyon expose mostly sedimentary rock layers.";
  RpTrace *trace = NULL;
  CHECK(rp_analyze(model, "c-smoke", "What type of rock is found at the Grand Canyon?",
                   context, "sedimentary", 40, &config, &trace) == RP_STATUS_OK);
  CHECK(rp_trace_word_count(trace) == 10);
  CHECK(rp_trace_root_word_count(trace) == 1);
  CHECK(fabs(rp_trace_percent_removed(trace) - 0.9) < 1e-12);

  double coefs[10];
  CHECK(rp_trace_coefficients(trace, coefs, 10) == 10);
  for (int i = 0; i < 10; i++) {
    if (i != 1) CHECK(coefs[i] < coefs[1]);
  }

  char *root = NULL;
  CHECK(rp_trace_root_text(trace, &root) == RP_STATUS_OK);
  CHECK(strcmp(root, "type") == 0);
  rp_string_free(root);
  rp_trace_free(trace);

  RpAnswerer *bad = NULL;
  CHECK(rp_answerer_new("nonsense", 1, &bad) == RP_STATUS_INVALID_ARGUMENT);
  CHECK(bad == NULL);
  CHECK(rp_last_error_message() != NULL);

  rp_answerer_free(model);
  puts("ok");
  return 0;
}
