import { defineConfig } from 'vitest/config';

// The SPA uses relative /api paths; in dev they proxy to the service.
export default defineConfig({
  server: {
    proxy: {
      '/api': process.env.SURGSCAN_API ?? 'http://127.0.0.1:8000',
    },
  },
  test: {
    environment: 'happy-dom',
    testTimeout: 30000,
  },
});
